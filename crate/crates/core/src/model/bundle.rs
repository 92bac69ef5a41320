use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensor::{ParamStore, Tensor};

use super::checkpoint::Archive;
use super::config::GeneratorConfig;
use super::latent::{LatentCode, SpatialNoiseSet, StyleSet};
use super::networks::{Discriminator, DiscriminatorKind, MappingNetwork, Synthesis};
use crate::error::{Error, Result};
use crate::imaging::Image;

/// Where progressive training currently stands.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingProgress {
    pub samples_seen: u64,
    pub steps: u64,
    pub active_blocks: usize,
    pub alpha: f32,
}

/// Immutable network definitions shared by every weight set.
pub struct Architecture {
    pub config: GeneratorConfig,
    pub mapping: MappingNetwork,
    pub synthesis: Synthesis,
    pub d_static: Discriminator,
    pub d_pairwise: Discriminator,
}

impl Architecture {
    pub fn new(config: &GeneratorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            mapping: MappingNetwork::new(config),
            synthesis: Synthesis::new(config),
            d_static: Discriminator::new(DiscriminatorKind::Static, config)?,
            d_pairwise: Discriminator::new(DiscriminatorKind::Pairwise, config)?,
        })
    }
}

/// All weights of the model plus training progress.
#[derive(Clone)]
pub struct ModelBundle {
    pub config: GeneratorConfig,
    pub mapping: ParamStore,
    pub generator: ParamStore,
    pub d_static: ParamStore,
    pub d_pairwise: ParamStore,
    pub ema_mapping: ParamStore,
    pub ema_generator: ParamStore,
    pub progress: TrainingProgress,
    arch: Arc<Architecture>,
}

impl std::fmt::Debug for ModelBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelBundle")
            .field("config", &self.config)
            .field("progress", &self.progress)
            .field("generator_scalars", &self.generator.num_scalars())
            .finish_non_exhaustive()
    }
}

impl ModelBundle {
    pub fn new(config: &GeneratorConfig, seed: u64) -> Result<Self> {
        let arch = Arc::new(Architecture::new(config)?);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mapping = ParamStore::new();
        arch.mapping.init(&mut mapping, &mut rng);
        let mut generator = ParamStore::new();
        arch.synthesis.init(&mut generator, &mut rng);
        let mut d_static = ParamStore::new();
        arch.d_static.init(&mut d_static, &mut rng);
        let mut d_pairwise = ParamStore::new();
        arch.d_pairwise.init(&mut d_pairwise, &mut rng);
        Ok(Self {
            config: config.clone(),
            ema_mapping: mapping.frozen(),
            ema_generator: generator.frozen(),
            mapping,
            generator,
            d_static,
            d_pairwise,
            progress: TrainingProgress {
                active_blocks: 1,
                alpha: 1.0,
                ..Default::default()
            },
            arch,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn shared_arch(&self) -> Arc<Architecture> {
        self.arch.clone()
    }

    /// Generator view over the live (trained) weights.
    pub fn live(&self) -> GeneratorView<'_> {
        GeneratorView {
            arch: &self.arch,
            mapping: &self.mapping,
            synthesis: &self.generator,
        }
    }

    /// Generator view over the exponential moving average, used for inference.
    pub fn ema(&self) -> GeneratorView<'_> {
        GeneratorView {
            arch: &self.arch,
            mapping: &self.ema_mapping,
            synthesis: &self.ema_generator,
        }
    }

    /// View over an arbitrary synthesis weight set, e.g. a fine-tuned copy.
    pub fn with_synthesis<'a>(&'a self, synthesis: &'a ParamStore) -> GeneratorView<'a> {
        GeneratorView {
            arch: &self.arch,
            mapping: &self.ema_mapping,
            synthesis,
        }
    }

    pub fn to_archive(&self) -> Result<Archive> {
        let meta = serde_json::json!({
            "config": self.config,
            "progress": self.progress,
        });
        Ok(Archive::new("model_bundle", meta)
            .with_group("mapping", &self.mapping)
            .with_group("generator", &self.generator)
            .with_group("d_static", &self.d_static)
            .with_group("d_pairwise", &self.d_pairwise)
            .with_group("ema_mapping", &self.ema_mapping)
            .with_group("ema_generator", &self.ema_generator))
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        archive.expect_kind("model_bundle")?;
        let config: GeneratorConfig = serde_json::from_value(archive.meta["config"].clone())?;
        let progress: TrainingProgress = serde_json::from_value(archive.meta["progress"].clone())?;
        let arch = Arc::new(Architecture::new(&config)?);
        let mut template = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        arch.mapping.init(&mut template, &mut rng);
        let mapping_layout = template;
        let mut generator_layout = ParamStore::new();
        arch.synthesis.init(&mut generator_layout, &mut rng);
        let mut dst_layout = ParamStore::new();
        arch.d_static.init(&mut dst_layout, &mut rng);
        let mut ddyn_layout = ParamStore::new();
        arch.d_pairwise.init(&mut ddyn_layout, &mut rng);
        let take = |name: &str, layout: &ParamStore, trainable: bool| -> Result<ParamStore> {
            let mut s = archive.group(name)?.clone();
            if !s.same_layout(layout) {
                return Err(Error::Format(format!("group `{name}` does not match the configured architecture")));
            }
            s.set_trainable(trainable);
            Ok(s)
        };
        Ok(Self {
            mapping: take("mapping", &mapping_layout, true)?,
            generator: take("generator", &generator_layout, true)?,
            d_static: take("d_static", &dst_layout, true)?,
            d_pairwise: take("d_pairwise", &ddyn_layout, true)?,
            ema_mapping: take("ema_mapping", &mapping_layout, false)?,
            ema_generator: take("ema_generator", &generator_layout, false)?,
            config,
            progress,
            arch,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_archive()?.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_archive(&Archive::load(path)?)
    }

    /// Bitwise equality of every weight set and the progress record.
    pub fn bit_eq(&self, other: &ModelBundle) -> bool {
        self.config == other.config
            && self.progress == other.progress
            && self.mapping.bit_eq(&other.mapping)
            && self.generator.bit_eq(&other.generator)
            && self.d_static.bit_eq(&other.d_static)
            && self.d_pairwise.bit_eq(&other.d_pairwise)
            && self.ema_mapping.bit_eq(&other.ema_mapping)
            && self.ema_generator.bit_eq(&other.ema_generator)
    }
}

/// Mapping plus synthesis weights under one architecture.
#[derive(Clone, Copy)]
pub struct GeneratorView<'a> {
    pub arch: &'a Architecture,
    pub mapping: &'a ParamStore,
    pub synthesis: &'a ParamStore,
}

impl<'a> GeneratorView<'a> {
    pub fn config(&self) -> &'a GeneratorConfig {
        &self.arch.config
    }

    pub fn map_tensor(&self, z: &Tensor) -> Result<Tensor> {
        self.arch.mapping.forward(self.mapping, z)
    }

    pub fn map_latents(&self, code: &LatentCode) -> Result<Vec<f32>> {
        code.validate(self.config())?;
        let z = Tensor::new(code.concat(), &[1, self.config().latent_dim]);
        Ok(self.map_tensor(&z)?.to_vec())
    }

    pub fn map_batch(&self, codes: &[LatentCode]) -> Result<Vec<Vec<f32>>> {
        let cfg = self.config();
        let mut data = Vec::with_capacity(codes.len() * cfg.latent_dim);
        for c in codes {
            c.validate(cfg)?;
            data.extend(c.concat());
        }
        let w = self.map_tensor(&Tensor::new(data, &[codes.len(), cfg.latent_dim]))?;
        Ok(w.data().chunks(cfg.style_dim).map(|c| c.to_vec()).collect())
    }

    /// Raw full-resolution output `[B, 3, r, r]` from per-block style and noise tensors.
    pub fn synthesize_tensors(&self, styles: &[Tensor], noise_static: &[Tensor], noise_dynamic: &[Tensor]) -> Result<Tensor> {
        let n = self.config().num_blocks;
        self.arch
            .synthesis
            .forward(self.synthesis, styles, noise_static, noise_dynamic, n, 1.0)
    }

    pub fn synthesize_batch(&self, styles: &[StyleSet], noise: &[&SpatialNoiseSet]) -> Result<Tensor> {
        let cfg = self.config();
        if styles.is_empty() || styles.len() != noise.len() {
            return Err(Error::Argument("need one noise set per style set".into()));
        }
        for (s, n) in styles.iter().zip(noise) {
            s.validate(cfg)?;
            n.validate(cfg)?;
        }
        let st = StyleSet::batch_tensors(styles);
        let ns = SpatialNoiseSet::batch_tensors(noise, false, cfg.num_blocks);
        let nd = SpatialNoiseSet::batch_tensors(noise, true, cfg.num_blocks);
        self.synthesize_tensors(&st, &ns, &nd)
    }

    /// Final-resolution image clamped to `[-1, 1]`.
    pub fn synthesize(&self, styles: &StyleSet, noise: &SpatialNoiseSet) -> Result<Image> {
        let t = self.synthesize_batch(std::slice::from_ref(styles), &[noise])?;
        Ok(Image::from_tensor(&t, 0).clamped())
    }

    /// Average of `count` mapped unit-normal latents.
    pub fn mean_style<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<f32>> {
        let cfg = self.config();
        let mut acc = vec![0f64; cfg.style_dim];
        let chunk = 500;
        let mut done = 0;
        while done < count {
            let b = chunk.min(count - done);
            let codes: Vec<LatentCode> = (0..b).map(|_| LatentCode::sample(rng, cfg)).collect();
            for w in self.map_batch(&codes)? {
                for (a, v) in acc.iter_mut().zip(w) {
                    *a += v as f64;
                }
            }
            done += b;
        }
        Ok(acc.iter().map(|v| (v / count as f64) as f32).collect())
    }
}

/// `ema <- alpha * ema + (1 - alpha) * live`, elementwise, evaluated in `f64`.
pub fn ema_update(ema: &mut ParamStore, live: &ParamStore, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument(format!("ema alpha {alpha} outside [0, 1]")));
    }
    if !ema.same_layout(live) {
        return Err(Error::Shape("ema and live weights differ in layout".into()));
    }
    let names: Vec<String> = ema.names().cloned().collect();
    for name in names {
        let e = ema.get(&name);
        let l = live.get(&name);
        let data = e
            .data()
            .iter()
            .zip(l.data())
            .map(|(&e, &l)| (alpha * e as f64 + (1.0 - alpha) * l as f64) as f32)
            .collect();
        ema.set_data(&name, data);
    }
    Ok(())
}
