//! Inverts a photograph with several variants and compares reconstructions.
//! The encoder-initialized variants use a small encoder trained on the spot.
//!
//! cargo run --release --example invert_image -- [MODEL] [IMAGE] [MASK]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timelapse::inversion::{invert, train_encoder, EncoderConfig, InversionConfig, InversionContext, Variant};
use timelapse::metrics::ExtractorSpec;
use timelapse::model::{GeneratorConfig, ModelBundle};
use timelapse::pipeline::{Scene, SyntheticCorpus};
use timelapse::training::{Trainer, TrainingConfig};
use timelapse::{Image, Mask};

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
    let side = bundle.config.final_resolution();
    let (target, mask) = match (args.next(), args.next()) {
        (Some(img), Some(mask)) => (Image::load(img)?, Mask::load(mask)?),
        (Some(img), None) => {
            let img = Image::load(img)?;
            let mask = Mask::horizon_split(img.width, img.height, 0.5);
            (img, mask)
        }
        _ => {
            let scene = Scene::random(&mut ChaCha8Rng::seed_from_u64(3));
            (scene.render(side, 0.0), scene.mask(side))
        }
    };

    let enc_cfg = EncoderConfig {
        samples: 400,
        heldout: 50,
        epochs: 2,
        ..EncoderConfig::toy()
    };
    let (encoder, report) = train_encoder(&bundle, &enc_cfg)?;
    println!("encoder held-out error {:.4} (mean style {:.4})", report.heldout_mae, report.mean_style_mae);

    let mut ctx = InversionContext::new(ExtractorSpec::default().build()?).with_encoder(encoder);
    let out = std::path::Path::new("target/examples-out/invert");
    for variant in [Variant::MO, Variant::E, Variant::EO, Variant::EOIF, Variant::EOIFS] {
        let config = InversionConfig {
            max_iters: 60,
            finetune_iters: 60,
            mean_style_samples: 1000,
            ..InversionConfig::with_variant(variant)
        };
        let r = invert(&bundle, &target, Some(&mask), &config, &mut ctx)?;
        println!("{variant:<6} ssim {:.4}  perceptual {:.4}  iterations {}", r.ssim, r.perceptual, r.trace.len());
        r.save(out.join(variant.as_str().to_ascii_lowercase()))?;
    }
    println!("results in {}", out.display());
    Ok(())
}
