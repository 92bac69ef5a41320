use serde::{Deserialize, Serialize};

use super::guided::{box_mean, guided_filter};
use crate::error::{Error, Result};
use crate::imaging::{check_same, Image, Mask};

/// Blending parameters; `eps` refers to intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendConfig {
    pub radius: usize,
    pub eps: f64,
    /// Width in pixels of the soft transition at the sky boundary.
    pub feather: usize,
}

impl BlendConfig {
    /// Radius 16 and feather 8 at 1024 px, scaled linearly with the side.
    pub fn for_size(side: usize) -> Self {
        let scale = side as f64 / 1024.0;
        Self {
            radius: ((16.0 * scale).round() as usize).max(1),
            eps: 1e-4,
            feather: (8.0 * scale).round() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 || !(self.eps > 0.0) {
            return Err(Error::Config("blend radius and eps must be positive".into()));
        }
        Ok(())
    }
}

/// Weight of the super-resolved frame at each pixel: one on the dynamic
/// side, zero on the static side, ramped across `feather` pixels.
pub fn dynamic_weight(mask: &Mask, feather: usize) -> Vec<f64> {
    let indicator: Vec<f64> = mask.data.iter().map(|&v| (v == 0) as u8 as f64).collect();
    if feather == 0 {
        return indicator;
    }
    box_mean(&indicator, mask.width, mask.height, feather / 2)
}

/// Dynamic pixels come from the SR frame; static pixels are the SR frame
/// guided-filtered with the original photograph as guide.
pub fn blend(input_hires: &Image, sr_frame: &Image, mask: &Mask, config: &BlendConfig) -> Result<Image> {
    config.validate()?;
    check_same(input_hires, sr_frame)?;
    let (w, h) = (sr_frame.width, sr_frame.height);
    let mask = if mask.width != w || mask.height != h {
        mask.resize_nearest(w, h)
    } else {
        mask.clone()
    };
    let alpha = dynamic_weight(&mask, config.feather);
    let filtered = if alpha.iter().all(|&a| a == 1.0) {
        sr_frame.clone()
    } else {
        guided_filter(input_hires, sr_frame, config.radius, 4.0 * config.eps)?
    };
    Ok(Image::from_fn(w, h, |x, y| {
        let a = alpha[y * w + x] as f32;
        let s = sr_frame.pixel(x, y);
        let f = filtered.pixel(x, y);
        [0, 1, 2].map(|c| a * s[c] + (1.0 - a) * f[c])
    }))
}

/// Inputs for blending every frame of an animation.
#[derive(Clone, Debug)]
pub struct BlendSpec {
    pub input_hires: Image,
    pub sr_frames: Vec<Image>,
    pub mask: Mask,
    pub config: BlendConfig,
}

impl BlendSpec {
    pub fn blend_frame(&self, index: usize) -> Result<Image> {
        let frame = self
            .sr_frames
            .get(index)
            .ok_or_else(|| Error::Argument(format!("frame {index} of {}", self.sr_frames.len())))?;
        blend(&self.input_hires, frame, &self.mask, &self.config)
    }

    pub fn blend_all(&self) -> Result<Vec<Image>> {
        (0..self.sr_frames.len()).map(|i| self.blend_frame(i)).collect()
    }
}
