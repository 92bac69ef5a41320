use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::gif::{GifEncoder, Repeat};
use image::{Delay, DynamicImage, Frame};
use serde::{Deserialize, Serialize};

use super::clock::ClockPresets;
use super::homography::Homography;
use super::warp::{warp_dynamic_noise, OutOfField};
use crate::error::{Error, Result};
use crate::imaging::{Image, Mask};
use crate::model::{GeneratorView, LatentCode, SpatialNoiseSet, StyleSet};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    Spherical,
}

/// Dynamic latent between `z1` (t = 0) and `z2` (t = 1).
pub fn interpolate_dynamic_latent(z1: &[f32], z2: &[f32], t: f64, mode: Interpolation) -> Result<Vec<f32>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Argument(format!("interpolation coefficient {t} outside [0, 1]")));
    }
    if z1.len() != z2.len() {
        return Err(Error::Dimension(format!("latent lengths {} and {} differ", z1.len(), z2.len())));
    }
    let linear = |a: f64, b: f64| ((1.0 - t) * a + t * b) as f32;
    if mode == Interpolation::Linear {
        return Ok(z1.iter().zip(z2).map(|(&a, &b)| linear(a as f64, b as f64)).collect());
    }
    let n1 = z1.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    let n2 = z2.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    let dot = z1.iter().zip(z2).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>();
    let cos = if n1 > 0.0 && n2 > 0.0 { (dot / (n1 * n2)).clamp(-1.0, 1.0) } else { 1.0 };
    let omega = cos.acos();
    let so = omega.sin();
    if so < 1e-6 {
        return Ok(z1.iter().zip(z2).map(|(&a, &b)| linear(a as f64, b as f64)).collect());
    }
    let (ca, cb) = (((1.0 - t) * omega).sin() / so, (t * omega).sin() / so);
    Ok(z1.iter().zip(z2).map(|(&a, &b)| (ca * a as f64 + cb * b as f64) as f32).collect())
}

/// Everything needed to animate one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct AnimationScript {
    pub homography: Homography,
    pub steps: usize,
    pub fps: f64,
    pub z_dynamic_start: Vec<f32>,
    pub z_dynamic_end: Vec<f32>,
    pub speed_scale: f64,
    pub interpolation: Interpolation,
    pub out_of_field: OutOfField,
}

impl AnimationScript {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Argument("animation needs at least one step".into()));
        }
        if !(self.speed_scale > 0.0) || !self.speed_scale.is_finite() {
            return Err(Error::Argument(format!("speed scale {} must be positive", self.speed_scale)));
        }
        if !(self.fps > 0.0) || !self.fps.is_finite() {
            return Err(Error::Argument(format!("fps {} must be positive", self.fps)));
        }
        if self.z_dynamic_start.len() != self.z_dynamic_end.len() {
            return Err(Error::Dimension("dynamic latent endpoints differ in length".into()));
        }
        Ok(())
    }

    /// Per-frame motion after applying the speed scale.
    pub fn frame_homography(&self) -> Result<Homography> {
        if self.speed_scale == 1.0 {
            Ok(self.homography)
        } else {
            self.homography.scaled(self.speed_scale)
        }
    }

    pub fn coefficient(&self, frame: usize) -> f64 {
        if self.steps <= 1 {
            0.0
        } else {
            frame as f64 / (self.steps - 1) as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionSpec {
    Clock { hour: u32 },
    Matrix { matrix: [[f64; 3]; 3] },
}

fn default_fps() -> f64 {
    10.0
}

fn default_speed() -> f64 {
    1.0
}

/// Human-editable script document (TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFile {
    pub motion: MotionSpec,
    /// Horizon in normalized units; taken from the segmentation mask when
    /// absent and one is available, else 0.5.
    #[serde(default)]
    pub horizon_y: Option<f64>,
    pub steps: usize,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub z_dynamic_start: Vec<f32>,
    pub z_dynamic_end: Vec<f32>,
    #[serde(default = "default_speed")]
    pub speed_scale: f64,
    #[serde(default)]
    pub interpolation: Interpolation,
    #[serde(default)]
    pub out_of_field: OutOfField,
}

impl ScriptFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn resolve(&self, presets: &ClockPresets, mask: Option<&Mask>) -> Result<AnimationScript> {
        let horizon_y = match (self.horizon_y, mask) {
            (Some(y), _) => y,
            (None, Some(m)) => m.horizon_y().clamp(0.05, 0.95),
            (None, None) => 0.5,
        };
        let homography = match &self.motion {
            MotionSpec::Clock { hour } => presets.homography(*hour, 1.0, horizon_y)?,
            MotionSpec::Matrix { matrix } => Homography::from_matrix(nalgebra::Matrix3::from_fn(|r, c| matrix[r][c]), horizon_y)?,
        };
        let script = AnimationScript {
            homography,
            steps: self.steps,
            fps: self.fps,
            z_dynamic_start: self.z_dynamic_start.clone(),
            z_dynamic_end: self.z_dynamic_end.clone(),
            speed_scale: self.speed_scale,
            interpolation: self.interpolation,
            out_of_field: self.out_of_field,
        };
        script.validate()?;
        Ok(script)
    }
}

/// Produces the per-frame styles for a dynamic latent.
pub trait StyleSource {
    fn styles_for(&self, view: &GeneratorView<'_>, z_dynamic: &[f32], t: f64) -> Result<StyleSet>;
}

/// Styles from the mapping network applied to `(z_static, z_dynamic)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedStyles {
    pub z_static: Vec<f32>,
}

impl StyleSource for MappedStyles {
    fn styles_for(&self, view: &GeneratorView<'_>, z_dynamic: &[f32], _t: f64) -> Result<StyleSet> {
        let code = LatentCode {
            z_static: self.z_static.clone(),
            z_dynamic: z_dynamic.to_vec(),
        };
        code.validate(view.config())?;
        let w = view.map_latents(&code)?;
        Ok(StyleSet::uniform(&w, view.config().num_blocks))
    }
}

/// Styles held fixed, e.g. the result of inverting a photograph.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedStyles(pub StyleSet);

impl StyleSource for FixedStyles {
    fn styles_for(&self, _view: &GeneratorView<'_>, _z_dynamic: &[f32], _t: f64) -> Result<StyleSet> {
        Ok(self.0.clone())
    }
}

/// Latents of frame `frame` (0-based): interpolated styles, untouched static
/// noise, and dynamic noise warped to index `frame + 1`.
pub fn frame_latents(
    view: &GeneratorView<'_>,
    source: &dyn StyleSource,
    noise: &SpatialNoiseSet,
    script: &AnimationScript,
    frame: usize,
) -> Result<(StyleSet, SpatialNoiseSet)> {
    let t = script.coefficient(frame);
    let z = interpolate_dynamic_latent(&script.z_dynamic_start, &script.z_dynamic_end, t, script.interpolation)?;
    let styles = source.styles_for(view, &z, t)?;
    let h = script.frame_homography()?;
    let dynamic_maps = warp_dynamic_noise(&noise.dynamic_maps, &h, frame as u32 + 1, script.out_of_field)?;
    Ok((
        styles,
        SpatialNoiseSet {
            static_maps: noise.static_maps.clone(),
            dynamic_maps,
        },
    ))
}

pub fn render_video(
    view: &GeneratorView<'_>,
    source: &dyn StyleSource,
    noise: &SpatialNoiseSet,
    script: &AnimationScript,
) -> Result<Vec<Image>> {
    script.validate()?;
    noise.validate(view.config())?;
    (0..script.steps)
        .map(|i| {
            let (styles, frame_noise) = frame_latents(view, source, noise, script, i)?;
            view.synthesize(&styles, &frame_noise)
        })
        .collect()
}

/// Writes `frame_0000.png`, `frame_0001.png`, ... into `dir`.
pub fn save_frames(frames: &[Image], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        f.save(dir.join(format!("frame_{i:04}.png")))?;
    }
    Ok(())
}

/// Looping animated GIF at `fps` frames per second.
pub fn save_gif(frames: &[Image], path: impl AsRef<Path>, fps: f64) -> Result<()> {
    if !(fps > 0.0) {
        return Err(Error::Argument(format!("fps {fps} must be positive")));
    }
    let mut enc = GifEncoder::new(BufWriter::new(File::create(path)?));
    enc.set_repeat(Repeat::Infinite)?;
    let delay = Delay::from_numer_denom_ms((1000.0 / fps).round().max(1.0) as u32, 1);
    for f in frames {
        let rgba = DynamicImage::ImageRgb8(f.to_rgb8()).to_rgba8();
        enc.encode_frame(Frame::from_parts(rgba, 0, 0, delay))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_endpoints() {
        let z1 = [0.5f32, -1.0, 2.0];
        let z2 = [-0.5f32, 1.0, -2.0];
        for mode in [Interpolation::Linear, Interpolation::Spherical] {
            assert_eq!(interpolate_dynamic_latent(&z1, &z2, 0.0, mode).unwrap(), z1.to_vec());
        }
        assert_eq!(interpolate_dynamic_latent(&z1, &z2, 1.0, Interpolation::Linear).unwrap(), z2.to_vec());
        assert_eq!(interpolate_dynamic_latent(&z1, &z2, 0.5, Interpolation::Linear).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            interpolate_dynamic_latent(&z1, &z2, 1.5, Interpolation::Linear),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn slerp_keeps_norm_between_orthogonal_unit_vectors() {
        let z = interpolate_dynamic_latent(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 0.5, Interpolation::Spherical).unwrap();
        let n: f32 = z.iter().map(|v| v * v).sum::<f32>().sqrt();
        assert!((n - 1.0).abs() < 1e-6);
    }

    #[test]
    fn script_file_resolves_clock_and_mask_horizon() {
        let text = r#"
steps = 8
z_dynamic_start = [0.0, 0.0, 0.0]
z_dynamic_end = [1.0, 0.0, 0.0]
speed_scale = 2.0
[motion]
kind = "clock"
hour = 3
"#;
        let f = ScriptFile::parse(text).unwrap();
        let mask = Mask::horizon_split(10, 10, 0.6);
        let s = f.resolve(&ClockPresets::default(), Some(&mask)).unwrap();
        assert!((s.homography.horizon_y - 0.6).abs() < 1e-12);
        assert_eq!(s.fps, 10.0);
        assert_eq!(s.out_of_field, OutOfField::FreshNormal { seed: 0 });
        let d = s.frame_homography().unwrap().displacements();
        assert!((d[0][0] - 0.04).abs() < 1e-9);
    }

    #[test]
    fn bad_scripts_are_rejected() {
        let text = "steps = 0\nz_dynamic_start = [0.0]\nz_dynamic_end = [0.0]\n[motion]\nkind = \"clock\"\nhour = 3\n";
        let f = ScriptFile::parse(text).unwrap();
        assert!(f.resolve(&ClockPresets::default(), None).is_err());
        assert!(ScriptFile::parse("steps = 2\nbogus = 1\n").is_err());
    }
}
