use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Preset, RunConfig};
use super::dataset::{ingest_images, ingest_videos, load_training_data};
use crate::animation::{
    render_video, save_frames, save_gif, AnimationScript, ClockPresets, FixedStyles, Interpolation, MappedStyles, ScriptFile,
};
use crate::error::{Error, Result};
use crate::imaging::{Image, Mask};
use crate::inversion::{invert, train_encoder, Encoder, InversionContext, InversionResult, Variant};
use crate::metrics::{evaluate_animation, evaluate_generation_ablation, save_reports, BlockMatching, GenerationProtocol};
use crate::model::{LatentCode, ModelBundle, SpatialNoiseSet};
use crate::relight::{relight_video, train_style_shifter, StyleShifter, StyleVocabulary};
use crate::superres::{BlendSpec, SrBackend, SrNet};
use crate::training::{MetricsLog, Trainer, TrainingData};

pub const TRAINING_STATE: &str = "training_state.bin";
pub const MODEL_FILE: &str = "model.bin";
pub const METRICS_FILE: &str = "metrics.jsonl";

#[derive(Parser, Debug)]
#[command(name = "timelapse", version, about = "Timelapse generation, inversion and animation")]
pub struct Cli {
    /// Run configuration (TOML); the preset is used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Overrides every seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a generator; resumes from OUT/training_state.bin when present.
    Train(TrainArgs),
    /// Render a video from random latents.
    SampleVideo(SampleVideoArgs),
    /// Invert a photograph into the generator.
    Invert(InvertArgs),
    /// Animate an inverted photograph.
    Animate(AnimateArgs),
    /// Animate an inverted photograph while shifting its lighting.
    Relight(RelightArgs),
    /// Upsample frames and restore static detail from a high-resolution photograph.
    Superres(SuperresArgs),
    /// Compare generated videos with real ones, or score generators.
    Evaluate(EvaluateArgs),
    EncoderTrain(ModelOutArgs),
    StyleShifterTrain(ModelOutArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Total number of training steps.
    #[arg(long)]
    pub steps: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub videos: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MotionArgs {
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub hour: Option<u32>,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Animation script (TOML); overrides frames, hour and fps.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Also write an animated GIF next to the frames.
    #[arg(long)]
    pub gif: bool,
}

#[derive(Args, Debug)]
pub struct SampleVideoArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub motion: MotionArgs,
}

#[derive(Args, Debug)]
pub struct InvertArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnimateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory written by `invert`.
    #[arg(long)]
    pub latents: PathBuf,
    /// Segmentation mask locating the horizon.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub motion: MotionArgs,
}

#[derive(Args, Debug)]
pub struct RelightArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub shifter: PathBuf,
    #[arg(long)]
    pub latents: PathBuf,
    #[arg(long)]
    pub style: String,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub motion: MotionArgs,
}

#[derive(Args, Debug)]
pub struct SuperresArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub input_hires: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Trained SR network; bilinear upsampling when absent.
    #[arg(long)]
    pub sr_net: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Real videos, one frame folder or GIF per video.
    #[arg(long, requires_all = ["generated", "mask_dir"])]
    pub real: Option<PathBuf>,
    /// Generated videos named like their real counterparts.
    #[arg(long)]
    pub generated: Option<PathBuf>,
    /// One static mask per video, `<id>.png`.
    #[arg(long)]
    pub mask_dir: Option<PathBuf>,
    /// Generators to score against the configured image corpus instead.
    #[arg(long, conflicts_with = "real")]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Args, Debug)]
pub struct ModelOutArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status. Failures print one JSON line to stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = e.print();
            } else {
                eprintln!(
                    "{}",
                    serde_json::json!({ "error": "usage", "message": e.render().to_string().trim() })
                );
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Validation(_) | Error::Argument(_) | Error::Dimension(_) | Error::Shape(_) => 3,
        Error::Data(_) | Error::Io(_) | Error::Image(_) | Error::Format(_) | Error::Json(_) | Error::Toml(_) => 4,
        Error::Numeric(_) | Error::Singular(_) => 1,
    }
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::preset(cli.preset.unwrap_or(Preset::Toy)),
    };
    let config = match cli.seed {
        Some(s) => config.with_seed(s),
        None => config,
    };
    config.validate()?;
    Ok(config)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::Train(a) => train(&config, a),
        Command::SampleVideo(a) => sample_video(&config, a),
        Command::Invert(a) => invert_cmd(&config, a),
        Command::Animate(a) => animate(&config, a),
        Command::Relight(a) => relight(&config, a),
        Command::Superres(a) => superres(&config, a),
        Command::Evaluate(a) => evaluate(&config, a),
        Command::EncoderTrain(a) => encoder_train(&config, a),
        Command::StyleShifterTrain(a) => shifter_train(&config, a),
    }
}

fn training_data(config: &RunConfig, images: Option<&Path>, videos: Option<&Path>) -> Result<TrainingData> {
    let res = config.generator.final_resolution();
    match (images.or(config.data.images.as_deref()), videos.or(config.data.videos.as_deref())) {
        (Some(i), Some(v)) => load_training_data(i, v, res, config.data.frame_stride),
        (None, None) => Ok(config.data.synthetic.build()),
        _ => Err(Error::Validation("give both an image and a video directory, or neither".into())),
    }
}

fn save_atomic(trainer: &Trainer, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    trainer.save(&tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn train(config: &RunConfig, a: &TrainArgs) -> Result<()> {
    let out = a.out.clone().unwrap_or_else(|| config.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    let data = training_data(config, a.images.as_deref(), a.videos.as_deref())?;
    let state = out.join(TRAINING_STATE);
    let metrics = out.join(METRICS_FILE);
    let mut trainer = if state.exists() {
        log::info!("resuming from {}", state.display());
        Trainer::resume(&crate::model::checkpoint::Archive::load(&state)?, data)?
    } else {
        if metrics.exists() {
            std::fs::remove_file(&metrics)?;
        }
        let bundle = ModelBundle::new(&config.generator, config.seed)?;
        Trainer::new(bundle, config.training.clone(), data)?
    };
    config.save(out.join("config.toml"))?;
    let log = MetricsLog::open(&metrics)?;
    while trainer.bundle.progress.steps < a.steps {
        let chunk = (a.steps - trainer.bundle.progress.steps).min(config.checkpoint_every);
        trainer.run(chunk, Some(&log))?;
        save_atomic(&trainer, &state)?;
    }
    if !state.exists() {
        save_atomic(&trainer, &state)?;
    }
    trainer.bundle.save(out.join(MODEL_FILE))?;
    log::info!("trained to step {}", trainer.bundle.progress.steps);
    Ok(())
}

/// Frames from `--script`, or from the configured clock motion with the
/// command-line overrides applied.
fn motion_script(config: &RunConfig, m: &MotionArgs, mask: Option<&Mask>, z_start: Vec<f32>, z_end: Vec<f32>) -> Result<AnimationScript> {
    let presets = ClockPresets::default();
    if let Some(path) = &m.script {
        return ScriptFile::load(path)?.resolve(&presets, mask);
    }
    let anim = &config.animation;
    let horizon = mask.map(|k| k.horizon_y().clamp(0.05, 0.95)).unwrap_or(0.5);
    let script = AnimationScript {
        homography: presets.homography(m.hour.unwrap_or(anim.hour), 1.0, horizon)?,
        steps: m.frames.unwrap_or(anim.frames),
        fps: m.fps.unwrap_or(anim.fps),
        z_dynamic_start: z_start,
        z_dynamic_end: z_end,
        speed_scale: anim.speed_scale,
        interpolation: Interpolation::default(),
        out_of_field: anim.out_of_field,
    };
    script.validate()?;
    Ok(script)
}

fn write_video(frames: &[Image], out: &Path, fps: f64, gif: bool) -> Result<()> {
    save_frames(frames, out)?;
    if gif {
        save_gif(frames, out.join("video.gif"), fps)?;
    }
    Ok(())
}

fn sample_video(config: &RunConfig, a: &SampleVideoArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let view = bundle.ema();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = LatentCode::sample(&mut rng, &bundle.config);
    let end = LatentCode::sample(&mut rng, &bundle.config);
    let noise = SpatialNoiseSet::sample(&mut rng, &bundle.config);
    let script = motion_script(config, &a.motion, None, start.z_dynamic, end.z_dynamic)?;
    let source = MappedStyles { z_static: start.z_static };
    let frames = render_video(&view, &source, &noise, &script)?;
    write_video(&frames, &a.out, script.fps, a.motion.gif)
}

fn load_mask(path: Option<&PathBuf>) -> Result<Option<Mask>> {
    path.map(Mask::load).transpose()
}

fn invert_cmd(config: &RunConfig, a: &InvertArgs) -> Result<()> {
    let variant = Variant::from_str(&a.variant).map_err(|_| {
        Error::Validation(format!(
            "unknown --variant `{}`; expected one of {}",
            a.variant,
            Variant::ALL.map(|v| v.as_str().to_ascii_lowercase()).join(", ")
        ))
    })?;
    if variant.spec().segmentation && a.mask.is_none() {
        return Err(Error::Validation(format!("variant {variant} requires --mask")));
    }
    let bundle = ModelBundle::load(&a.model)?;
    let target = Image::load(&a.image)?;
    let mask = load_mask(a.mask.as_ref())?;
    let mut inv = config.inversion.clone();
    inv.variant = variant;
    if let Some(n) = a.iters {
        inv.max_iters = n;
        inv.finetune_iters = n;
    }
    let mut ctx = InversionContext::new(config.eval.extractor.build()?);
    if let Some(path) = &a.encoder {
        ctx = ctx.with_encoder(Encoder::load(path)?);
    }
    let result = invert(&bundle, &target, mask.as_ref(), &inv, &mut ctx)?;
    result.save(&a.out)?;
    let trace = MetricsLog::open(a.out.join("trace.jsonl"))?;
    for r in &result.trace {
        trace.append(r)?;
    }
    for r in &result.finetune_trace {
        trace.append(r)?;
    }
    log::info!("ssim {:.4} perceptual {:.4}", result.ssim, result.perceptual);
    Ok(())
}

fn inverted(bundle: &ModelBundle, dir: &Path) -> Result<InversionResult> {
    let inv = InversionResult::load(dir)?;
    inv.check_compatible(bundle)?;
    Ok(inv)
}

fn animate(config: &RunConfig, a: &AnimateArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let inv = inverted(&bundle, &a.latents)?;
    let mask = load_mask(a.mask.as_ref())?;
    let zeros = vec![0.0; bundle.config.dynamic_dim];
    let script = motion_script(config, &a.motion, mask.as_ref(), zeros.clone(), zeros)?;
    let view = match &inv.finetuned {
        Some(w) => bundle.with_synthesis(w),
        None => bundle.ema(),
    };
    let frames = render_video(&view, &FixedStyles(inv.styles.clone()), &inv.noise, &script)?;
    write_video(&frames, &a.out, script.fps, a.motion.gif)
}

fn relight(config: &RunConfig, a: &RelightArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let inv = inverted(&bundle, &a.latents)?;
    let shifter = StyleShifter::load(&a.shifter)?;
    let vocab = match &a.vocab {
        Some(p) => StyleVocabulary::load(p)?,
        None => StyleVocabulary::default(),
    };
    let mask = load_mask(a.mask.as_ref())?;
    let zeros = vec![0.0; bundle.config.dynamic_dim];
    let script = motion_script(config, &a.motion, mask.as_ref(), zeros.clone(), zeros)?;
    let frames = relight_video(&bundle, &shifter, &inv, &vocab, &a.style, &script)?;
    write_video(&frames, &a.out, script.fps, a.motion.gif)
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| ["png", "jpg", "jpeg"].iter().any(|x| x.eq_ignore_ascii_case(e)))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!("no frames in {}", dir.display())));
    }
    Ok(files)
}

fn superres(config: &RunConfig, a: &SuperresArgs) -> Result<()> {
    let backend = match &a.sr_net {
        Some(p) => SrBackend::Net(SrNet::load(p)?),
        None => SrBackend::Bilinear,
    };
    let frames = image_files(&a.frames)?
        .iter()
        .map(|p| Image::load(p).and_then(|f| backend.super_resolve(&f)))
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = (frames[0].width, frames[0].height);
    let input = Image::load(&a.input_hires)?;
    let input = if input.width != w || input.height != h {
        log::warn!("resizing the high-resolution input to {w}x{h}");
        input.center_crop_square().resize(w, h)
    } else {
        input
    };
    let spec = BlendSpec {
        input_hires: input,
        sr_frames: frames,
        mask: Mask::load(&a.mask)?,
        config: config.blend_for(w.min(h)),
    };
    save_frames(&spec.blend_all()?, &a.out)
}

fn evaluate(config: &RunConfig, a: &EvaluateArgs) -> Result<()> {
    let extractor = config.eval.extractor.build()?;
    let reports = if let (Some(real), Some(generated), Some(mask_dir)) = (&a.real, &a.generated, &a.mask_dir) {
        let res = config.generator.final_resolution();
        let real = ingest_videos(real, res, 1)?;
        let generated = ingest_videos(generated, res, 1)?;
        let mut gen_videos = Vec::with_capacity(real.videos.len());
        let mut masks = Vec::with_capacity(real.videos.len());
        for v in &real.videos {
            let g = generated
                .videos
                .iter()
                .find(|g| g.id == v.id)
                .ok_or_else(|| Error::Data(format!("no generated video named `{}`", v.id)))?;
            gen_videos.push(g.frames.clone());
            masks.push(Mask::load(mask_dir.join(format!("{}.png", v.id)))?.resize_nearest(res, res));
        }
        let real_videos: Vec<Vec<Image>> = real.videos.iter().map(|v| v.frames.clone()).collect();
        let flow = BlockMatching::default();
        vec![evaluate_animation("animation", &real_videos, &gen_videos, &masks, extractor.as_ref(), Some(&flow))?]
    } else if !a.model.is_empty() {
        let bundles = a.model.iter().map(ModelBundle::load).collect::<Result<Vec<_>>>()?;
        let named: Vec<(String, &ModelBundle)> = a
            .model
            .iter()
            .zip(&bundles)
            .map(|(p, b)| (p.display().to_string(), b))
            .collect();
        let res = config.generator.final_resolution();
        let corpus = match &config.data.images {
            Some(dir) => ingest_images(dir, res)?.images,
            None => config.data.synthetic.build().images,
        };
        let protocol = GenerationProtocol {
            pairs: config.eval.pairs,
            fid_samples: config.eval.fid_samples,
            seed: config.eval.seed,
            static_mask: Mask::horizon_split(res, res, 0.5),
        };
        evaluate_generation_ablation(&named, &corpus, &protocol, extractor.as_ref())?
    } else {
        return Err(Error::Validation("evaluate needs --real, --generated and --mask-dir, or --model".into()));
    };
    save_reports(&reports, &a.report)?;
    for r in &reports {
        if r.curves.is_some() {
            std::fs::write(a.report.with_extension("csv"), r.curves_csv())?;
        }
    }
    Ok(())
}

fn encoder_train(config: &RunConfig, a: &ModelOutArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let (encoder, report) = train_encoder(&bundle, &config.encoder)?;
    encoder.save(&a.out)?;
    std::fs::write(a.out.with_extension("json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn shifter_train(config: &RunConfig, a: &ModelOutArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let (shifter, report) = train_style_shifter(&bundle.ema(), &config.shifter)?;
    shifter.save(&a.out)?;
    std::fs::write(a.out.with_extension("json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        run_command(std::iter::once("timelapse").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors() {
        assert_eq!(code(&["fly"]), 2);
        assert_eq!(code(&["train", "--steps", "1", "--bogus"]), 2);
        assert_eq!(Cli::try_parse_from(["timelapse", "--help"]).unwrap_err().exit_code(), 0);
    }

    #[test]
    fn segmentation_variant_needs_a_mask() {
        let err = execute(&Cli::parse_from([
            "timelapse", "invert", "--model", "missing.bin", "--image", "x.png", "--variant", "eoifs", "--out", "o",
        ]))
        .unwrap_err();
        assert!(matches!(&err, Error::Validation(m) if m.contains("--mask")), "{err}");
        assert_eq!(exit_code(&err), 3);
    }

    #[test]
    fn bad_config_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "version = 1\nunexpected = true\n").unwrap();
        let p = path.to_str().unwrap();
        assert_eq!(code(&["--config", p, "encoder-train", "--model", "m", "--out", "o"]), 3);
        assert_eq!(code(&["encoder-train", "--model", "/nonexistent/model.bin", "--out", "o"]), 4);
    }
}
