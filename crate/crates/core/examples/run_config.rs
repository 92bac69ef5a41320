//! Writes the toy and paper run configurations as TOML and reads one back.
//!
//! cargo run --example run_config

use timelapse::pipeline::{Preset, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::Path::new("target/examples-out/config");
    std::fs::create_dir_all(dir)?;
    for (preset, name) in [(Preset::Toy, "toy.toml"), (Preset::Paper, "paper.toml")] {
        let config = RunConfig::preset(preset).with_seed(42);
        config.save(dir.join(name))?;
        assert_eq!(RunConfig::load(dir.join(name))?, config);
        println!(
            "{name}: {}px, {} samples to the final resolution, inversion {} iterations",
            config.generator.final_resolution(),
            config.training.schedule.samples_to_final(config.generator.num_blocks),
            config.inversion.max_iters
        );
    }
    Ok(())
}
