use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inference procedures, named by their stages: Encoder init, Optimize,
/// tie W to its Initial value, Fine-tune, Segmentation-guided noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    I2S,
    MO,
    E,
    EO,
    EOI,
    EOIF,
    EOIFS,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StyleInit {
    MeanStyle,
    Encoder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseInit {
    Random,
    Zero,
}

/// Which stages a variant runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariantSpec {
    pub init_styles: StyleInit,
    pub init_noise: NoiseInit,
    pub optimize_noise: bool,
    pub optimize_styles: bool,
    pub init_penalty: bool,
    pub finetune: bool,
    pub segmentation: bool,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::I2S,
        Variant::MO,
        Variant::E,
        Variant::EO,
        Variant::EOI,
        Variant::EOIF,
        Variant::EOIFS,
    ];

    pub fn spec(self) -> VariantSpec {
        use NoiseInit::*;
        use StyleInit::*;
        let (init_styles, init_noise, optimize_noise, optimize_styles, init_penalty, finetune, segmentation) = match self {
            Variant::I2S => (MeanStyle, Random, false, true, false, false, false),
            Variant::MO => (MeanStyle, Zero, true, true, false, false, false),
            Variant::E => (Encoder, Random, false, false, false, false, false),
            Variant::EO => (Encoder, Zero, true, true, false, false, false),
            Variant::EOI => (Encoder, Zero, true, true, true, false, false),
            Variant::EOIF => (Encoder, Zero, true, true, true, true, false),
            Variant::EOIFS => (Encoder, Zero, true, true, true, true, true),
        };
        VariantSpec {
            init_styles,
            init_noise,
            optimize_noise,
            optimize_styles,
            init_penalty,
            finetune,
            segmentation,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::I2S => "i2s",
            Variant::MO => "mo",
            Variant::E => "e",
            Variant::EO => "eo",
            Variant::EOI => "eoi",
            Variant::EOIF => "eoif",
            Variant::EOIFS => "eoifs",
        }
    }
}

impl VariantSpec {
    pub fn optimizes(&self) -> bool {
        self.optimize_noise || self.optimize_styles
    }

    pub fn needs_encoder(&self) -> bool {
        self.init_styles == StyleInit::Encoder
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown inversion variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    pub variant: Variant,
    pub max_iters: usize,
    pub perceptual_coeff: f64,
    /// Step-size factor applied to the noise maps relative to the styles.
    pub noise_grad_scale: f64,
    pub style_penalty_coeff: f64,
    pub initial_lr: f64,
    pub plateau_halving_patience: usize,
    pub early_stop_patience: usize,
    pub finetune_iters: usize,
    pub finetune_lr: f64,
    pub finetune_perceptual_weight: f64,
    /// Unit-normal samples averaged for the mean-style initialization.
    pub mean_style_samples: usize,
    pub seed: u64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self::with_variant(Variant::EOIF)
    }
}

impl InversionConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            variant,
            max_iters: 500,
            perceptual_coeff: 0.01,
            noise_grad_scale: 0.001,
            style_penalty_coeff: 0.01,
            initial_lr: 0.1,
            plateau_halving_patience: 20,
            early_stop_patience: 100,
            finetune_iters: 500,
            finetune_lr: 0.001,
            finetune_perceptual_weight: 10.0,
            mean_style_samples: 10_000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.perceptual_coeff,
            self.noise_grad_scale,
            self.style_penalty_coeff,
            self.initial_lr,
            self.finetune_lr,
            self.finetune_perceptual_weight,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("inversion coefficients must be positive".into()));
        }
        if self.plateau_halving_patience == 0 || self.early_stop_patience == 0 || self.mean_style_samples == 0 {
            return Err(Error::Config("patiences and sample counts must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.as_str()));
        }
        assert!("eoix".parse::<Variant>().is_err());
    }

    #[test]
    fn defaults_validate() {
        let c = InversionConfig::default();
        c.validate().unwrap();
        assert_eq!(c.variant, Variant::EOIF);
        let mut bad = c;
        bad.noise_grad_scale = 0.0;
        assert!(bad.validate().is_err());
    }
}
