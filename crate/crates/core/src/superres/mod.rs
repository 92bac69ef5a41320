//! Four-times super-resolution of animation frames and guided-filter
//! blending with the original photograph.

mod blend;
mod guided;
mod sr;

pub use blend::{blend, dynamic_weight, BlendConfig, BlendSpec};
pub use guided::{box_mean, guided_filter, guided_filter_plane};
pub use sr::{build_sr_dataset, train_sr, SrBackend, SrConfig, SrNet, SrPair, SCALE};
