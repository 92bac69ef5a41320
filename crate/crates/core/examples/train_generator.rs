//! Trains the toy generator on the procedural landscape corpus.
//!
//! cargo run --release --example train_generator -- [OUT_DIR] [STEPS]

use timelapse::model::{GeneratorConfig, ModelBundle};
use timelapse::pipeline::SyntheticCorpus;
use timelapse::training::{MetricsLog, Trainer, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "target/examples-out/train".into()));
    let steps: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    std::fs::create_dir_all(&out)?;

    let data = SyntheticCorpus::toy().build();
    let bundle = ModelBundle::new(&GeneratorConfig::toy(), 0)?;
    let mut trainer = Trainer::new(bundle, TrainingConfig::toy(), data)?;
    let log = MetricsLog::open(out.join("metrics.jsonl"))?;
    for chunk in 0..steps.div_ceil(50) {
        let n = (steps - chunk * 50).min(50);
        let last = trainer.run(n, Some(&log))?.pop().expect("non-empty chunk");
        println!(
            "step {:>5}  res {:>2}  alpha {:.2}  pairwise {:.3}  d {:+.3}  g {:+.3}",
            last.step, last.resolution, last.alpha, last.pairwise_proportion, last.d_loss, last.g_loss
        );
    }
    trainer.save(out.join("training_state.bin"))?;
    trainer.bundle.save(out.join("model.bin"))?;
    println!("wrote {}", out.join("model.bin").display());
    Ok(())
}
