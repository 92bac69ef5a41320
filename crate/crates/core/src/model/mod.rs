//! Mapping network, synthesis network, both critics and latent sampling.

mod bundle;
pub mod checkpoint;
mod config;
pub(crate) mod latent;
mod networks;

pub use bundle::{ema_update, Architecture, GeneratorView, ModelBundle, TrainingProgress};
pub use config::{GeneratorConfig, DYNAMIC_DIM, LATENT_DIM, STATIC_DIM, STYLE_DIM};
pub use latent::{broadcast_styles, sample_latents, LatentCode, MixingRule, NoiseMap, SpatialNoiseSet, StyleSet};
pub use networks::{Discriminator, DiscriminatorKind, MappingNetwork, Synthesis};
