use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticCorpus;
use crate::animation::OutOfField;
use crate::error::{Error, Result};
use crate::inversion::{EncoderConfig, InversionConfig};
use crate::metrics::ExtractorSpec;
use crate::model::GeneratorConfig;
use crate::relight::StyleShifterConfig;
use crate::superres::{BlendConfig, SrConfig};
use crate::training::TrainingConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Toy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory of still images; the synthetic corpus is used when unset.
    pub images: Option<PathBuf>,
    /// Directory of frame folders or animated GIFs.
    pub videos: Option<PathBuf>,
    pub frame_stride: usize,
    pub synthetic: SyntheticCorpus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnimationConfig {
    pub frames: usize,
    pub fps: f64,
    pub hour: u32,
    pub speed_scale: f64,
    pub out_of_field: OutOfField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub fid_samples: usize,
    pub pairs: usize,
    pub seed: u64,
    pub extractor: ExtractorSpec,
}

/// Everything a run needs, as one TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub preset: Preset,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub checkpoint_every: u64,
    pub generator: GeneratorConfig,
    pub training: TrainingConfig,
    pub data: DataConfig,
    pub inversion: InversionConfig,
    pub encoder: EncoderConfig,
    pub shifter: StyleShifterConfig,
    pub sr: SrConfig,
    /// Guided-filter blending; scaled defaults when unset.
    pub blend: Option<BlendConfig>,
    pub animation: AnimationConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let toy = preset == Preset::Toy;
        Self {
            version: CONFIG_VERSION,
            preset,
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            checkpoint_every: if toy { 500 } else { 5_000 },
            generator: if toy { GeneratorConfig::toy() } else { GeneratorConfig::paper() },
            training: if toy { TrainingConfig::toy() } else { TrainingConfig::paper() },
            data: DataConfig {
                images: None,
                videos: None,
                frame_stride: 1,
                synthetic: SyntheticCorpus::toy(),
            },
            inversion: InversionConfig::default(),
            encoder: if toy { EncoderConfig::toy() } else { EncoderConfig::paper() },
            shifter: if toy { StyleShifterConfig::toy() } else { StyleShifterConfig::paper() },
            sr: SrConfig::default(),
            blend: None,
            animation: AnimationConfig {
                frames: 16,
                fps: 10.0,
                hour: 3,
                speed_scale: 1.0,
                out_of_field: OutOfField::default(),
            },
            eval: EvalConfig {
                fid_samples: if toy { 256 } else { 1_200 },
                pairs: if toy { 64 } else { 1_200 },
                seed: 0,
                extractor: ExtractorSpec::default(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Validation(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.generator.validate()?;
        self.training.validate(self.generator.num_blocks)?;
        self.inversion.validate()?;
        self.encoder.validate()?;
        self.shifter.validate()?;
        if let Some(b) = &self.blend {
            b.validate()?;
        }
        if self.data.frame_stride == 0 || self.checkpoint_every == 0 {
            return Err(Error::Validation("frame stride and checkpoint interval must be positive".into()));
        }
        if self.animation.frames == 0 || !(self.animation.fps > 0.0) || !(1..=12).contains(&self.animation.hour) {
            return Err(Error::Validation("animation needs frames > 0, fps > 0 and an hour in 1..=12".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: toml::Table = toml::from_str(text)?;
        match raw.get("version").and_then(|v| v.as_integer()) {
            Some(v) if v > CONFIG_VERSION as i64 => {
                return Err(Error::Validation(format!(
                    "config version {v} is newer than the supported version {CONFIG_VERSION}"
                )))
            }
            None => return Err(Error::Validation("config lacks an integer `version`".into())),
            _ => {}
        }
        let config: Self = toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Derives every module seed from one global seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.training.seed = seed;
        self.inversion.seed = seed.wrapping_add(1);
        self.encoder.seed = seed.wrapping_add(2);
        self.shifter.seed = seed.wrapping_add(3);
        self.sr.seed = seed.wrapping_add(4);
        self.eval.seed = seed.wrapping_add(5);
        self
    }

    pub fn blend_for(&self, side: usize) -> BlendConfig {
        self.blend.clone().unwrap_or_else(|| BlendConfig::for_size(side))
    }
}
