//! Builds an SR training set from reconstructions of downsampled frames,
//! trains the x4 network and blends its output with a high-resolution
//! photograph so the static region keeps the photograph's detail.
//!
//! cargo run --release --example super_resolve -- [MODEL]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timelapse::inversion::{InversionConfig, InversionContext, Variant};
use timelapse::metrics::ExtractorSpec;
use timelapse::model::{GeneratorConfig, ModelBundle};
use timelapse::pipeline::{Scene, SyntheticCorpus};
use timelapse::superres::{blend, build_sr_dataset, train_sr, BlendConfig, SrBackend, SrConfig, SCALE};
use timelapse::training::{Trainer, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = match std::env::args().nth(1) {
        Some(path) => ModelBundle::load(path)?,
        None => {
            let mut t = Trainer::new(ModelBundle::new(&GeneratorConfig::toy(), 0)?, TrainingConfig::toy(), SyntheticCorpus::toy().build())?;
            t.run(60, None)?;
            t.bundle
        }
    };
    let side = bundle.config.final_resolution();
    let hi = SCALE * side;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let frames: Vec<_> = (0..6).map(|_| Scene::random(&mut rng).render(hi, 0.0)).collect();

    let inv = InversionConfig {
        max_iters: 40,
        mean_style_samples: 1000,
        ..InversionConfig::with_variant(Variant::MO)
    };
    let mut ctx = InversionContext::new(ExtractorSpec::default().build()?);
    let pairs = build_sr_dataset(&bundle, &frames, &inv, &mut ctx)?;
    let (net, trace) = train_sr(&pairs, &SrConfig { steps: 150, ..SrConfig::default() })?;
    println!("SR L1: first {:.4}, last {:.4}", trace[0], trace[trace.len() - 1]);

    let scene = Scene::random(&mut rng);
    let photo = scene.render(hi, 0.0);
    let low = scene.render(side, 0.4);
    let net = SrBackend::Net(net);
    let up = net.super_resolve(&low)?;
    let out = blend(&photo, &up, &scene.mask(hi), &BlendConfig::for_size(hi))?;
    let bilinear = SrBackend::Bilinear.super_resolve(&low)?;
    println!(
        "static-region detail: bilinear MAE {:.4}, network MAE {:.4}, blended MAE {:.4} against the photograph",
        bilinear.mae(&photo)?,
        up.mae(&photo)?,
        out.mae(&photo)?
    );
    let dir = std::path::Path::new("target/examples-out/superres");
    std::fs::create_dir_all(dir)?;
    up.save(dir.join("network.png"))?;
    out.save(dir.join("blended.png"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
