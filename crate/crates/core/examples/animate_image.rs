//! Inverts a still landscape and animates it: static noise and styles stay
//! fixed while the sky noise is advected by a clock-hour homography.
//!
//! cargo run --release --example animate_image -- [MODEL] [HOUR]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timelapse::animation::{render_video, save_frames, save_gif, FixedStyles, MotionSpec, ScriptFile, ClockPresets};
use timelapse::inversion::{invert, InversionConfig, InversionContext, Variant};
use timelapse::metrics::{static_consistency_curve, CurveMetric, ExtractorSpec};
use timelapse::model::{GeneratorConfig, ModelBundle};
use timelapse::pipeline::{Scene, SyntheticCorpus};
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
    let hour: u32 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(9);
    let side = bundle.config.final_resolution();
    let scene = Scene::random(&mut ChaCha8Rng::seed_from_u64(11));
    let (photo, mask) = (scene.render(side, 0.0), scene.mask(side));

    let config = InversionConfig {
        max_iters: 80,
        mean_style_samples: 1000,
        ..InversionConfig::with_variant(Variant::MO)
    };
    let mut ctx = InversionContext::new(ExtractorSpec::default().build()?);
    let inv = invert(&bundle, &photo, Some(&mask), &config, &mut ctx)?;

    let script = ScriptFile {
        motion: MotionSpec::Clock { hour },
        horizon_y: None,
        steps: 16,
        fps: 8.0,
        z_dynamic_start: vec![0.0; bundle.config.dynamic_dim],
        z_dynamic_end: vec![0.0; bundle.config.dynamic_dim],
        speed_scale: 1.5,
        interpolation: Default::default(),
        out_of_field: Default::default(),
    }
    .resolve(&ClockPresets::default(), Some(&mask))?;
    let frames = render_video(&bundle.ema(), &FixedStyles(inv.styles.clone()), &inv.noise, &script)?;

    let curve = static_consistency_curve(&frames, &mask, CurveMetric::Ssim)?;
    println!("static-region SSIM against frame 0: min {:.4}", curve.iter().copied().fold(1.0, f64::min));
    let out = std::path::Path::new("target/examples-out/animate");
    save_frames(&frames, out)?;
    save_gif(&frames, out.join("animation.gif"), script.fps)?;
    println!("{} frames -> {}", frames.len(), out.display());
    Ok(())
}
