//! Projection of real photographs into the generator's style and noise
//! spaces, with optional generator finetuning.

mod config;
mod encoder;
mod optimize;

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensor::ParamStore;

pub use config::{InversionConfig, NoiseInit, StyleInit, Variant, VariantSpec};
pub use encoder::{synthetic_style_pairs, train_encoder, Encoder, EncoderConfig, EncoderReport};
pub use optimize::{
    finetune_generator, latent_optimizer, optimize_latents, project_noise, reconstruction_loss, FinetuneOutcome,
    FinetuneRecord, IterRecord, OptimizeOutcome, PlateauSchedule, Region,
};

use crate::error::{Error, Result};
use crate::imaging::{Image, Mask};
use crate::metrics::{perceptual_distance, ssim, FeatureExtractor};
use crate::model::checkpoint::Archive;
use crate::model::{ModelBundle, NoiseMap, SpatialNoiseSet, StyleSet};

/// Shared resources for inverting several images with one model.
#[derive(Clone)]
pub struct InversionContext {
    pub extractor: Arc<dyn FeatureExtractor>,
    pub encoder: Option<Encoder>,
    /// Cached mean style; computed on first use when absent.
    pub mean_style: Option<Vec<f32>>,
}

impl InversionContext {
    pub fn new(extractor: Arc<dyn FeatureExtractor>) -> Self {
        Self {
            extractor,
            encoder: None,
            mean_style: None,
        }
    }

    pub fn with_encoder(mut self, encoder: Encoder) -> Self {
        self.encoder = Some(encoder);
        self
    }
}

#[derive(Clone, Debug)]
pub struct InversionResult {
    pub variant: Variant,
    pub styles: StyleSet,
    pub noise: SpatialNoiseSet,
    /// Finetuned synthesis weights, for variants that finetune.
    pub finetuned: Option<ParamStore>,
    pub reconstruction: Image,
    pub trace: Vec<IterRecord>,
    pub finetune_trace: Vec<FinetuneRecord>,
    pub ssim: f64,
    pub perceptual: f64,
}

#[derive(Serialize, Deserialize)]
struct LatentsFile {
    variant: Variant,
    styles: StyleSet,
    noise: SpatialNoiseSet,
    trace: Vec<IterRecord>,
    finetune_trace: Vec<FinetuneRecord>,
    ssim: f64,
    perceptual: f64,
}

impl InversionResult {
    pub const LATENTS_FILE: &'static str = "latents.json";
    pub const WEIGHTS_FILE: &'static str = "finetuned.bin";
    pub const RECONSTRUCTION_FILE: &'static str = "reconstruction.png";

    /// Writes latents and traces as JSON, finetuned weights as an archive
    /// and the reconstruction as PNG into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let file = LatentsFile {
            variant: self.variant,
            styles: self.styles.clone(),
            noise: self.noise.clone(),
            trace: self.trace.clone(),
            finetune_trace: self.finetune_trace.clone(),
            ssim: self.ssim,
            perceptual: self.perceptual,
        };
        std::fs::write(dir.join(Self::LATENTS_FILE), serde_json::to_string(&file)?)?;
        let weights = dir.join(Self::WEIGHTS_FILE);
        match &self.finetuned {
            Some(w) => Archive::new("synthesis_weights", serde_json::Value::Null).with_group("synthesis", w).save(&weights)?,
            None if weights.exists() => std::fs::remove_file(&weights)?,
            None => {}
        }
        self.reconstruction.save(dir.join(Self::RECONSTRUCTION_FILE))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let file: LatentsFile = serde_json::from_str(&std::fs::read_to_string(dir.join(Self::LATENTS_FILE))?)?;
        let weights = dir.join(Self::WEIGHTS_FILE);
        let finetuned = if weights.exists() {
            let a = Archive::load(&weights)?;
            a.expect_kind("synthesis_weights")?;
            Some(a.group("synthesis")?.frozen())
        } else {
            None
        };
        Ok(Self {
            variant: file.variant,
            styles: file.styles,
            noise: file.noise,
            finetuned,
            reconstruction: Image::load(dir.join(Self::RECONSTRUCTION_FILE))?,
            trace: file.trace,
            finetune_trace: file.finetune_trace,
            ssim: file.ssim,
            perceptual: file.perceptual,
        })
    }

    /// Rejects latents or weights that do not fit `bundle`.
    pub fn check_compatible(&self, bundle: &ModelBundle) -> Result<()> {
        self.styles.validate(&bundle.config)?;
        self.noise.validate(&bundle.config)?;
        if let Some(w) = &self.finetuned {
            if !w.same_layout(&bundle.ema_generator) {
                return Err(Error::Validation("finetuned weights do not match the model".into()));
            }
        }
        Ok(())
    }
    /// Average of the per-block styles, used where one vector is needed.
    pub fn mean_w(&self) -> Vec<f32> {
        let n = self.styles.styles.len() as f32;
        let mut acc = vec![0f32; self.styles.styles[0].len()];
        for s in &self.styles.styles {
            for (a, v) in acc.iter_mut().zip(s) {
                *a += v / n;
            }
        }
        acc
    }
}

fn zero_noise(noise: &SpatialNoiseSet) -> SpatialNoiseSet {
    let zero = |maps: &[NoiseMap]| {
        maps.iter()
            .map(|m| NoiseMap {
                side: m.side,
                data: vec![0.0; m.data.len()],
            })
            .collect()
    };
    SpatialNoiseSet {
        static_maps: zero(&noise.static_maps),
        dynamic_maps: zero(&noise.dynamic_maps),
    }
}

/// Runs the configured inference variant on one image. Targets not at the
/// model resolution are resized.
pub fn invert(
    bundle: &ModelBundle,
    target: &Image,
    mask: Option<&Mask>,
    config: &InversionConfig,
    ctx: &mut InversionContext,
) -> Result<InversionResult> {
    config.validate()?;
    let spec = config.variant.spec();
    let view = bundle.ema();
    let cfg = view.config();
    let res = cfg.final_resolution();
    let target = if target.width != res || target.height != res {
        log::info!("resizing {}x{} target to {res}x{res}", target.width, target.height);
        target.resize(res, res)
    } else {
        target.clone()
    };
    let mask = match (spec.segmentation, mask) {
        (true, None) => return Err(Error::Config(format!("variant {} needs a sky mask", config.variant))),
        (true, Some(m)) => Some(if m.width != res || m.height != res { m.resize_nearest(res, res) } else { m.clone() }),
        (false, Some(_)) => {
            log::warn!("variant {} ignores the supplied mask", config.variant);
            None
        }
        (false, None) => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let styles = match spec.init_styles {
        StyleInit::Encoder => {
            let enc = ctx
                .encoder
                .as_ref()
                .ok_or_else(|| Error::Config(format!("variant {} needs a trained encoder", config.variant)))?;
            enc.predict(std::slice::from_ref(&target))?.remove(0)
        }
        StyleInit::MeanStyle => {
            if ctx.mean_style.is_none() {
                ctx.mean_style = Some(view.mean_style(config.mean_style_samples, &mut rng)?);
            }
            StyleSet::uniform(ctx.mean_style.as_ref().unwrap(), cfg.num_blocks)
        }
    };
    let random = SpatialNoiseSet::sample(&mut rng, cfg);
    let noise = match spec.init_noise {
        NoiseInit::Random => random,
        NoiseInit::Zero => zero_noise(&random),
    };
    let opt = optimize_latents(&view, &target, &styles, &noise, &spec, config, ctx.extractor.as_ref(), mask.as_ref())?;
    let (finetuned, finetune_trace) = if spec.finetune {
        let ft = finetune_generator(bundle, &target, &opt.styles, &opt.noise, config, ctx.extractor.as_ref())?;
        (Some(ft.synthesis), ft.trace)
    } else {
        (None, Vec::new())
    };
    let reconstruction = match &finetuned {
        Some(w) => bundle.with_synthesis(w).synthesize(&opt.styles, &opt.noise)?,
        None => view.synthesize(&opt.styles, &opt.noise)?,
    };
    let ssim = ssim(&reconstruction, &target)?;
    let perceptual = perceptual_distance(ctx.extractor.as_ref(), &reconstruction, &target)?;
    Ok(InversionResult {
        variant: config.variant,
        styles: opt.styles,
        noise: opt.noise,
        finetuned,
        reconstruction,
        trace: opt.trace,
        finetune_trace,
        ssim,
        perceptual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ConvPyramid;
    use crate::model::GeneratorConfig;

    fn tiny() -> ModelBundle {
        let cfg = GeneratorConfig {
            channel_widths: vec![8, 8],
            mapping_depth: 2,
            ..GeneratorConfig::with_width_factor(2, 1.0)
        };
        ModelBundle::new(&cfg, 3).unwrap()
    }

    fn ctx() -> InversionContext {
        InversionContext::new(Arc::new(ConvPyramid::random(7, &[3, 4, 4]).unwrap()))
    }

    fn quick(variant: Variant) -> InversionConfig {
        InversionConfig {
            max_iters: 30,
            finetune_iters: 5,
            mean_style_samples: 64,
            ..InversionConfig::with_variant(variant)
        }
    }

    fn target() -> Image {
        Image::from_fn(8, 8, |x, y| [x as f32 / 8.0 - 0.5, y as f32 / 8.0 - 0.5, 0.1])
    }

    #[test]
    fn variant_table() {
        let s = Variant::I2S.spec();
        assert!(s.optimize_styles && !s.optimize_noise && !s.needs_encoder() && s.init_noise == NoiseInit::Random);
        let s = Variant::E.spec();
        assert!(!s.optimizes() && s.needs_encoder());
        let s = Variant::EO.spec();
        assert!(s.optimizes() && !s.init_penalty && s.init_noise == NoiseInit::Zero);
        assert!(Variant::EOI.spec().init_penalty && !Variant::EOI.spec().finetune);
        assert!(Variant::EOIF.spec().finetune && !Variant::EOIF.spec().segmentation);
        assert!(Variant::EOIFS.spec().segmentation);
    }

    #[test]
    fn mean_style_optimization_reduces_loss() {
        let b = tiny();
        let r = invert(&b, &target(), None, &quick(Variant::MO), &mut ctx()).unwrap();
        let first = r.trace.first().unwrap().loss;
        let best = r.trace.iter().map(|t| t.loss).fold(f64::INFINITY, f64::min);
        assert!(best < first, "{first} -> {best}");
        assert!(r.finetuned.is_none());
    }

    #[test]
    fn encoder_variants_require_an_encoder() {
        let b = tiny();
        let err = invert(&b, &target(), None, &quick(Variant::EO), &mut ctx()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn segmentation_variant_requires_a_mask_and_alternates() {
        let b = tiny();
        let mut c = ctx();
        let enc = Encoder::new(&EncoderConfig { stem_channels: 4, stage_channels: [4, 4, 4, 4], hidden: 8, ..EncoderConfig::toy() }, 8, 2, 512, vec![0.0; 512]).unwrap();
        c.encoder = Some(enc);
        let cfg = quick(Variant::EOIFS);
        assert!(matches!(invert(&b, &target(), None, &cfg, &mut c), Err(Error::Config(_))));
        let mask = Mask::horizon_split(8, 8, 0.5);
        let r = invert(&b, &target(), Some(&mask), &cfg, &mut c).unwrap();
        assert_eq!(r.trace[0].region, Region::Static);
        assert_eq!(r.trace[1].region, Region::Dynamic);
        assert_eq!(r.trace.len(), 30);
        let m = &r.noise.static_maps[1];
        assert!(m.data[..m.side * m.side / 2].iter().all(|&v| v == 0.0));
        assert!(r.finetuned.is_some());
    }

    #[test]
    fn zero_step_finetune_returns_identical_weights() {
        let b = tiny();
        let styles = StyleSet::uniform(&vec![0.1; 512], 2);
        let noise = SpatialNoiseSet::zeros(&b.config);
        let cfg = InversionConfig {
            finetune_iters: 0,
            ..InversionConfig::default()
        };
        let out = finetune_generator(&b, &target(), &styles, &noise, &cfg, ctx().extractor.as_ref()).unwrap();
        assert!(out.synthesis.bit_eq(&b.ema_generator));
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn finetune_leaves_latents_and_keeps_best() {
        let b = tiny();
        let styles = StyleSet::uniform(&vec![0.1; 512], 2);
        let noise = SpatialNoiseSet::zeros(&b.config);
        let cfg = InversionConfig {
            finetune_iters: 8,
            finetune_lr: 0.01,
            ..InversionConfig::default()
        };
        let out = finetune_generator(&b, &target(), &styles, &noise, &cfg, ctx().extractor.as_ref()).unwrap();
        let best = out.trace.iter().map(|t| t.loss).fold(f64::INFINITY, f64::min);
        assert_eq!(out.trace[out.best_iter].loss, best);
        assert!(best < out.trace[0].loss);
    }

    #[test]
    fn save_and_load_round_trip() {
        let b = tiny();
        let mut c = ctx();
        c.encoder = Some(Encoder::new(&EncoderConfig { stem_channels: 4, stage_channels: [4, 4, 4, 4], hidden: 8, ..EncoderConfig::toy() }, 8, 2, 512, vec![0.0; 512]).unwrap());
        let r = invert(&b, &target(), None, &quick(Variant::EOIF), &mut c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.save(dir.path()).unwrap();
        let back = InversionResult::load(dir.path()).unwrap();
        back.check_compatible(&b).unwrap();
        assert_eq!(back.styles, r.styles);
        assert_eq!(back.noise, r.noise);
        assert!(back.finetuned.unwrap().bit_eq(&r.finetuned.unwrap().frozen()));
        assert_eq!(back.trace, r.trace);
    }

    #[test]
    fn encoder_only_variant_runs_no_iterations() {
        let b = tiny();
        let mut c = ctx();
        c.encoder = Some(Encoder::new(&EncoderConfig { stem_channels: 4, stage_channels: [4, 4, 4, 4], hidden: 8, ..EncoderConfig::toy() }, 8, 2, 512, vec![0.0; 512]).unwrap());
        let r = invert(&b, &target(), None, &quick(Variant::E), &mut c).unwrap();
        assert!(r.trace.is_empty());
        assert_eq!(r.styles, c.encoder.as_ref().unwrap().predict(&[target()]).unwrap()[0]);
    }
}
