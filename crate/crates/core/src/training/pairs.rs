use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::model::{broadcast_styles, GeneratorConfig, GeneratorView, LatentCode, MixingRule, SpatialNoiseSet};

/// A sequence of frames from one timelapse.
#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub id: String,
    pub frames: Vec<Image>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    RealVideoPair,
    FakeSharedStatic,
    CropPair,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FramePair {
    pub frame_a: Image,
    pub frame_b: Image,
    pub source: PairSource,
    /// Video index and frame indices of real pairs; top-left offsets of crop pairs.
    pub origin: PairOrigin,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PairOrigin {
    Video { video: usize, frames: (usize, usize) },
    Crops { a: (usize, usize), b: (usize, usize) },
    Generated,
}

/// Two distinct frames of one uniformly chosen video (among those with at
/// least two frames). Each index is marginally uniform.
pub fn sample_real_pair<R: Rng + ?Sized>(videos: &[Video], rng: &mut R) -> Result<FramePair> {
    let (video, i, j) = sample_real_indices(videos, rng)?;
    let v = &videos[video];
    Ok(FramePair {
        frame_a: v.frames[i].clone(),
        frame_b: v.frames[j].clone(),
        source: PairSource::RealVideoPair,
        origin: PairOrigin::Video { video, frames: (i, j) },
    })
}

pub(crate) fn sample_real_indices<R: Rng + ?Sized>(videos: &[Video], rng: &mut R) -> Result<(usize, usize, usize)> {
    let eligible: Vec<usize> = (0..videos.len()).filter(|&k| videos[k].frames.len() >= 2).collect();
    if eligible.is_empty() {
        return Err(Error::Data("no video with at least two frames".into()));
    }
    let video = eligible[rng.random_range(0..eligible.len())];
    let n = videos[video].frames.len();
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    Ok((video, i, j))
}

/// Two `crop_size` squares at distinct offsets of the same frame.
pub fn sample_crop_pair<R: Rng + ?Sized>(frame: &Image, crop_size: usize, rng: &mut R) -> Result<FramePair> {
    if crop_size == 0 || crop_size > frame.width || crop_size > frame.height {
        return Err(Error::Argument(format!(
            "crop {crop_size} does not fit a {}x{} frame",
            frame.width, frame.height
        )));
    }
    let (mx, my) = (frame.width - crop_size, frame.height - crop_size);
    if mx == 0 && my == 0 {
        return Err(Error::Argument(
            "frame equals crop size; two distinct crop locations do not exist".into(),
        ));
    }
    let a = (rng.random_range(0..=mx), rng.random_range(0..=my));
    let b = loop {
        let b = (rng.random_range(0..=mx), rng.random_range(0..=my));
        if b != a {
            break b;
        }
    };
    Ok(FramePair {
        frame_a: frame.crop(a.0, a.1, crop_size, crop_size)?,
        frame_b: frame.crop(b.0, b.1, crop_size, crop_size)?,
        source: PairSource::CropPair,
        origin: PairOrigin::Crops { a, b },
    })
}

/// Inputs of a generated pair: static latent and static noise are shared by
/// value, the dynamic parts are drawn independently for each frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FakePairLatents {
    pub code_a: LatentCode,
    pub code_b: LatentCode,
    pub noise_a: SpatialNoiseSet,
    pub noise_b: SpatialNoiseSet,
}

impl FakePairLatents {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, config: &GeneratorConfig) -> Self {
        let code_a = LatentCode::sample(rng, config);
        let static_maps = SpatialNoiseSet::sample_static(rng, config);
        let z_dyn_b = crate::model::latent::normal_vec(rng, config.dynamic_dim);
        let dyn_a = SpatialNoiseSet::sample_static(rng, config);
        let dyn_b = SpatialNoiseSet::sample_static(rng, config);
        Self {
            code_b: code_a.with_dynamic(z_dyn_b),
            code_a,
            noise_a: SpatialNoiseSet {
                static_maps: static_maps.clone(),
                dynamic_maps: dyn_a,
            },
            noise_b: SpatialNoiseSet {
                static_maps,
                dynamic_maps: dyn_b,
            },
        }
    }

    pub fn static_bit_equal(&self) -> bool {
        let z = self
            .code_a
            .z_static
            .iter()
            .zip(&self.code_b.z_static)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        let s = self
            .noise_a
            .static_maps
            .iter()
            .zip(&self.noise_b.static_maps)
            .all(|(a, b)| a.bit_eq(b));
        z && s && self.code_a.z_static.len() == self.code_b.z_static.len()
    }

    pub fn dynamic_differs(&self) -> bool {
        self.code_a.z_dynamic != self.code_b.z_dynamic
            && self
                .noise_a
                .dynamic_maps
                .iter()
                .zip(&self.noise_b.dynamic_maps)
                .all(|(a, b)| !a.bit_eq(b))
    }
}

/// Renders a pair sharing `(z_static, S_static)` with the given generator.
pub fn sample_fake_pair<R: Rng + ?Sized>(generator: &GeneratorView<'_>, rng: &mut R) -> Result<(FramePair, FakePairLatents)> {
    let cfg = generator.config();
    let lat = FakePairLatents::sample(rng, cfg);
    let (frame_a, frame_b) = render_fake_pair(generator, &lat)?;
    Ok((
        FramePair {
            frame_a,
            frame_b,
            source: PairSource::FakeSharedStatic,
            origin: PairOrigin::Generated,
        },
        lat,
    ))
}

pub fn render_fake_pair(generator: &GeneratorView<'_>, lat: &FakePairLatents) -> Result<(Image, Image)> {
    let n = generator.config().num_blocks;
    let ws = generator.map_batch(&[lat.code_a.clone(), lat.code_b.clone()])?;
    let sa = broadcast_styles(&ws[0..1], &MixingRule::Single, n)?;
    let sb = broadcast_styles(&ws[1..2], &MixingRule::Single, n)?;
    let t = generator.synthesize_batch(&[sa, sb], &[&lat.noise_a, &lat.noise_b])?;
    Ok((
        Image::from_tensor(&t, 0).clamped(),
        Image::from_tensor(&t, 1).clamped(),
    ))
}
