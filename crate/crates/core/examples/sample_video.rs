//! Renders a timelapse from random latents: fixed static code, dynamic code
//! interpolated between two samples, dynamic noise advected by a clock preset.
//!
//! cargo run --release --example sample_video -- [MODEL] [HOUR]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timelapse::animation::{clock_homography, render_video, save_gif, AnimationScript, Interpolation, MappedStyles, OutOfField};
use timelapse::model::{GeneratorConfig, LatentCode, ModelBundle, SpatialNoiseSet};
use timelapse::pipeline::SyntheticCorpus;
use timelapse::training::{Trainer, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let bundle = match args.next() {
        Some(path) => ModelBundle::load(path)?,
        None => {
            let mut t = Trainer::new(ModelBundle::new(&GeneratorConfig::toy(), 0)?, TrainingConfig::toy(), SyntheticCorpus::toy().build())?;
            t.run(60, None)?;
            t.bundle
        }
    };
    let hour: u32 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = LatentCode::sample(&mut rng, &bundle.config);
    let end = LatentCode::sample(&mut rng, &bundle.config);
    let noise = SpatialNoiseSet::sample(&mut rng, &bundle.config);
    let script = AnimationScript {
        homography: clock_homography(hour, 1.0, 0.5)?,
        steps: 24,
        fps: 12.0,
        z_dynamic_start: start.z_dynamic,
        z_dynamic_end: end.z_dynamic,
        speed_scale: 1.0,
        interpolation: Interpolation::Spherical,
        out_of_field: OutOfField::default(),
    };
    let frames = render_video(&bundle.ema(), &MappedStyles { z_static: start.z_static }, &noise, &script)?;

    let out = std::path::Path::new("target/examples-out");
    std::fs::create_dir_all(out)?;
    save_gif(&frames, out.join("sample_video.gif"), script.fps)?;
    println!("{} frames at hour {hour} -> {}", frames.len(), out.join("sample_video.gif").display());
    Ok(())
}
