use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LATENT_DIM: usize = 512;
pub const DYNAMIC_DIM: usize = 3;
pub const STATIC_DIM: usize = LATENT_DIM - DYNAMIC_DIM;
pub const STYLE_DIM: usize = 512;

/// Shape of the mapping network and the synthesis network.
///
/// Block `n` (1-based) works at `2^(n+1)` pixels, so `num_blocks = 7`
/// produces 256 px images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_blocks: usize,
    pub latent_dim: usize,
    pub dynamic_dim: usize,
    pub style_dim: usize,
    pub channel_widths: Vec<usize>,
    pub mapping_depth: usize,
    pub mapping_lr_mul: f32,
}

impl GeneratorConfig {
    /// StyleGAN feature-map widths multiplied by `width_factor`.
    pub fn with_width_factor(num_blocks: usize, width_factor: f64) -> Self {
        let channel_widths = (1..=num_blocks)
            .map(|n| {
                let base = (8192usize >> n).min(512);
                ((base as f64 * width_factor).round() as usize).max(1)
            })
            .collect();
        Self {
            num_blocks,
            latent_dim: LATENT_DIM,
            dynamic_dim: DYNAMIC_DIM,
            style_dim: STYLE_DIM,
            channel_widths,
            mapping_depth: 8,
            mapping_lr_mul: 0.01,
        }
    }

    /// 256 px model.
    pub fn paper() -> Self {
        Self::with_width_factor(7, 1.0)
    }

    pub fn paper_512() -> Self {
        Self::with_width_factor(8, 1.0)
    }

    /// 32 px model sized for a single CPU core.
    pub fn toy() -> Self {
        Self {
            channel_widths: vec![64, 64, 32, 32],
            ..Self::with_width_factor(4, 1.0)
        }
    }

    pub fn static_dim(&self) -> usize {
        self.latent_dim - self.dynamic_dim
    }

    pub fn final_resolution(&self) -> usize {
        1 << (self.num_blocks + 1)
    }

    /// Side length of block `n` (1-based).
    pub fn resolution(&self, block: usize) -> usize {
        1 << (block + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 || self.num_blocks > 10 {
            return Err(Error::Config(format!("num_blocks {} outside 1..=10", self.num_blocks)));
        }
        if self.channel_widths.len() != self.num_blocks {
            return Err(Error::Config(format!(
                "{} channel widths for {} blocks",
                self.channel_widths.len(),
                self.num_blocks
            )));
        }
        if self.channel_widths.iter().any(|&c| c < 2) {
            return Err(Error::Config("channel widths must be at least 2".into()));
        }
        if self.dynamic_dim == 0 || self.dynamic_dim >= self.latent_dim {
            return Err(Error::Config("dynamic_dim must lie in 1..latent_dim".into()));
        }
        if self.mapping_depth == 0 || self.style_dim == 0 {
            return Err(Error::Config("mapping depth and style dim must be positive".into()));
        }
        if !(self.mapping_lr_mul > 0.0) {
            return Err(Error::Config("mapping_lr_mul must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolutions_follow_block_count() {
        for n in 1..=9 {
            let c = GeneratorConfig::with_width_factor(n, 0.25);
            c.validate().unwrap();
            assert_eq!(c.final_resolution(), 1 << (n + 1));
            assert_eq!(c.channel_widths.len(), n);
        }
        assert_eq!(GeneratorConfig::paper().final_resolution(), 256);
        assert_eq!(GeneratorConfig::paper_512().final_resolution(), 512);
        assert_eq!(GeneratorConfig::toy().final_resolution(), 32);
        assert_eq!(STATIC_DIM + DYNAMIC_DIM, LATENT_DIM);
    }

    #[test]
    fn stylegan_widths() {
        let c = GeneratorConfig::paper();
        assert_eq!(c.channel_widths, vec![512, 512, 512, 512, 256, 128, 64]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = GeneratorConfig::toy();
        c.channel_widths.pop();
        assert!(c.validate().is_err());
        let mut c = GeneratorConfig::toy();
        c.dynamic_dim = 512;
        assert!(c.validate().is_err());
    }
}
