//! Style-based timelapse generation: a generator with separate static and
//! dynamic latents, adversarial training on images and frame pairs, latent
//! inversion of real photographs, homography-driven animation, relighting,
//! super-resolution blending and evaluation metrics.

pub mod animation;
pub mod error;
pub mod imaging;
pub mod inversion;
pub mod metrics;
pub mod model;
pub mod relight;
pub mod superres;
pub mod training;
pub mod pipeline;

pub use error::{Error, Result};
pub use imaging::{Image, Mask};
