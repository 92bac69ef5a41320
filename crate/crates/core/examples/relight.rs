//! Trains the style shifter, then animates an inverted image while moving
//! its lighting toward a named vocabulary style.
//!
//! cargo run --release --example relight -- [MODEL] [STYLE]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timelapse::animation::{clock_homography, save_gif, AnimationScript};
use timelapse::inversion::{invert, InversionConfig, InversionContext, Variant};
use timelapse::metrics::ExtractorSpec;
use timelapse::model::{GeneratorConfig, ModelBundle};
use timelapse::pipeline::{Scene, SyntheticCorpus};
use timelapse::relight::{relight_video, train_style_shifter, StyleShifterConfig, StyleVocabulary};
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
    let style = args.next().unwrap_or_else(|| "sunset".into());
    let vocabulary = StyleVocabulary::default();
    println!("vocabulary: {}", vocabulary.names().collect::<Vec<_>>().join(", "));

    let config = StyleShifterConfig {
        max_steps: 400,
        ..StyleShifterConfig::toy()
    };
    let (shifter, report) = train_style_shifter(&bundle.ema(), &config)?;
    let ends = &report.endpoints;
    println!(
        "shifter: {} steps, start error {:.4}, end error {:.4}, mean shift {:.4}",
        report.steps, ends.start_error, ends.end_error, ends.shift
    );

    let side = bundle.config.final_resolution();
    let photo = Scene::random(&mut ChaCha8Rng::seed_from_u64(5)).render(side, 0.0);
    let inv_config = InversionConfig {
        max_iters: 60,
        mean_style_samples: 1000,
        ..InversionConfig::with_variant(Variant::MO)
    };
    let inv = invert(&bundle, &photo, None, &inv_config, &mut InversionContext::new(ExtractorSpec::default().build()?))?;

    let dyn_dim = bundle.config.dynamic_dim;
    let script = AnimationScript {
        homography: clock_homography(3, 1.0, 0.5)?,
        steps: 16,
        fps: 8.0,
        z_dynamic_start: vec![0.0; dyn_dim],
        z_dynamic_end: vec![0.0; dyn_dim],
        speed_scale: 1.0,
        interpolation: Default::default(),
        out_of_field: Default::default(),
    };
    let frames = relight_video(&bundle, &shifter, &inv, &vocabulary, &style, &script)?;
    let out = std::path::Path::new("target/examples-out");
    std::fs::create_dir_all(out)?;
    save_gif(&frames, out.join("relight.gif"), script.fps)?;
    println!("relit toward `{style}` -> {}", out.join("relight.gif").display());
    Ok(())
}
