//! Videos from latents: homography-warped dynamic noise, interpolated dynamic
//! latents and the twelve clock-direction motions.

mod clock;
mod homography;
mod video;
mod warp;

pub use clock::{clock_homography, ClockPreset, ClockPresets};
pub use homography::{reflect_point, ConjugatedField, Homography, Point, ReflectedField};
pub use video::{
    frame_latents, interpolate_dynamic_latent, render_video, save_frames, save_gif, AnimationScript, FixedStyles,
    Interpolation, MappedStyles, MotionSpec, ScriptFile, StyleSource,
};
pub use warp::{warp_dynamic_noise, warp_map, warp_with, OutOfField};
