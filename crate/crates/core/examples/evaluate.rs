//! Scores a generator (FID, static-region SSIM and perceptual distance over
//! fake pairs) and an animation against procedural ground-truth videos.
//!
//! cargo run --release --example evaluate -- [MODEL]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timelapse::animation::{render_video, AnimationScript, FixedStyles, ClockPresets};
use timelapse::inversion::{invert, InversionConfig, InversionContext, Variant};
use timelapse::metrics::{evaluate_animation, evaluate_generation_ablation, BlockMatching, ExtractorSpec, GenerationProtocol};
use timelapse::model::{GeneratorConfig, ModelBundle};
use timelapse::pipeline::{Scene, SyntheticCorpus};
use timelapse::training::{Trainer, TrainingConfig};
use timelapse::Mask;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = SyntheticCorpus::toy();
    let trained = match std::env::args().nth(1) {
        Some(path) => ModelBundle::load(path)?,
        None => {
            let mut t = Trainer::new(ModelBundle::new(&GeneratorConfig::toy(), 0)?, TrainingConfig::toy(), corpus.build())?;
            t.run(60, None)?;
            t.bundle
        }
    };
    let untrained = ModelBundle::new(&trained.config, 0)?;
    let side = trained.config.final_resolution();
    let extractor = ExtractorSpec::default().build()?;

    let protocol = GenerationProtocol {
        pairs: 32,
        fid_samples: 128,
        seed: 0,
        static_mask: Mask::horizon_split(side, side, 0.5),
    };
    let images = corpus.build().images;
    let named = [("untrained".to_string(), &untrained), ("trained".to_string(), &trained)];
    for r in evaluate_generation_ablation(&named, &images, &protocol, extractor.as_ref())? {
        println!(
            "{:<10} FID {:.3}  static SSIM {:.4}  static perceptual {:.4}",
            r.name,
            r.fid.unwrap_or(f64::NAN),
            r.masked_ssim.unwrap_or(f64::NAN),
            r.perceptual.unwrap_or(f64::NAN)
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut real, mut generated, mut masks) = (Vec::new(), Vec::new(), Vec::new());
    let mut ctx = InversionContext::new(extractor.clone());
    let config = InversionConfig {
        max_iters: 40,
        mean_style_samples: 1000,
        ..InversionConfig::with_variant(Variant::MO)
    };
    for _ in 0..3 {
        let scene = Scene::random(&mut rng);
        let frames: Vec<_> = (0..8).map(|i| scene.render(side, i as f64 / 7.0)).collect();
        let mask = scene.mask(side);
        let inv = invert(&trained, &frames[0], Some(&mask), &config, &mut ctx)?;
        let script = AnimationScript {
            homography: ClockPresets::default().homography(3, 1.0, mask.horizon_y())?,
            steps: frames.len(),
            fps: 8.0,
            z_dynamic_start: vec![0.0; 3],
            z_dynamic_end: vec![0.0; 3],
            speed_scale: 1.0,
            interpolation: Default::default(),
            out_of_field: Default::default(),
        };
        generated.push(render_video(&trained.ema(), &FixedStyles(inv.styles), &inv.noise, &script)?);
        real.push(frames);
        masks.push(mask);
    }
    let report = evaluate_animation("animation", &real, &generated, &masks, extractor.as_ref(), Some(&BlockMatching::default()))?;
    println!("animation curves (frame, static SSIM vs first real frame, SSIM vs same real frame):");
    let curves = report.curves.as_ref().expect("animation report has curves");
    for n in 0..curves.ssim_first.len() {
        println!("  {n}  {:.4}  {:.4}", curves.ssim_first[n], curves.ssim_same[n]);
    }
    println!("sky motion {:.4}", report.motion.unwrap_or(f64::NAN));
    Ok(())
}
