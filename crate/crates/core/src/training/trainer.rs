use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensor::{Adam, ParamStore, Tensor};

use super::loss::{discriminator_loss, generator_loss, r1_penalty, r1_surrogate};
use super::pairs::{sample_crop_pair, sample_real_indices, Video};
use super::schedule::{PhaseKind, TrainingSchedule};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::model::checkpoint::Archive;
use crate::model::latent::normal_vec;
use crate::model::{ema_update, Architecture, MixingRule, ModelBundle};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub schedule: TrainingSchedule,
    pub r1_gamma: f32,
    /// Apply R1 every this many critic steps (scaled up accordingly).
    pub r1_interval: u64,
    /// Root-mean-square input perturbation of the R1 parameter-gradient estimate.
    pub r1_fd_step: f32,
    pub style_mixing_prob: f64,
    pub ema_alpha: f64,
    pub adam_beta1: f32,
    pub adam_beta2: f32,
    pub seed: u64,
}

impl TrainingConfig {
    pub fn paper() -> Self {
        Self {
            schedule: TrainingSchedule::paper(),
            r1_gamma: 10.0,
            r1_interval: 1,
            r1_fd_step: 1e-2,
            style_mixing_prob: 0.9,
            ema_alpha: 0.999,
            adam_beta1: 0.0,
            adam_beta2: 0.99,
            seed: 0,
        }
    }

    /// Shortened schedule with the penalty applied every fourth critic step.
    pub fn toy() -> Self {
        Self {
            schedule: TrainingSchedule::toy(),
            r1_interval: 4,
            ..Self::paper()
        }
    }

    pub fn validate(&self, num_blocks: usize) -> Result<()> {
        self.schedule.validate(num_blocks)?;
        if !(self.r1_gamma >= 0.0) || self.r1_interval == 0 || !(self.r1_fd_step > 0.0) {
            return Err(Error::Config("invalid R1 settings".into()));
        }
        if !(0.0..=1.0).contains(&self.style_mixing_prob) || !(0.0..=1.0).contains(&self.ema_alpha) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Still images and videos the model learns from.
#[derive(Clone, Debug, Default)]
pub struct TrainingData {
    pub images: Vec<Image>,
    pub videos: Vec<Video>,
}

impl TrainingData {
    pub fn validate(&self) -> Result<()> {
        if self.images.is_empty() {
            return Err(Error::Data("training needs at least one image".into()));
        }
        if !self.videos.iter().any(|v| v.frames.len() >= 2) {
            return Err(Error::Data("training needs a video with at least two frames".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Static,
    Pairwise,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub samples_seen: u64,
    pub phase: usize,
    pub phase_kind: PhaseKind,
    pub resolution: usize,
    pub alpha: f32,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub pairwise_proportion: f64,
    pub branch: Branch,
    pub crop_pairs: usize,
    pub d_loss: f32,
    pub g_loss: f32,
    pub r1: f64,
}

/// Append-only JSON-lines sink, safe to share between threads.
pub struct MetricsLog {
    out: Mutex<BufWriter<File>>,
}

impl MetricsLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(f)),
        })
    }

    pub fn append<T: Serialize>(&self, record: &T) -> Result<()> {
        let line = serde_json::to_string(record)?;
        let mut out = self.out.lock().expect("metrics log poisoned");
        writeln!(out, "{line}")?;
        out.flush()?;
        Ok(())
    }
}

struct Cycler {
    order: Vec<usize>,
    pos: usize,
}

impl Cycler {
    fn next<R: Rng + ?Sized>(&mut self, len: usize, rng: &mut R) -> usize {
        if self.pos >= self.order.len() || self.order.len() != len {
            self.order = (0..len).collect();
            self.order.shuffle(rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Inputs of one generated batch, restricted to the active blocks.
pub struct FakeInputs {
    /// Mapping-network input `[N, latent_dim]`, static part first.
    pub latents: Tensor,
    pub styles: Vec<Tensor>,
    pub noise_static: Vec<Tensor>,
    pub noise_dynamic: Vec<Tensor>,
}

fn noise_batch<R: Rng + ?Sized>(rng: &mut R, batch: usize, blocks: usize) -> Vec<Tensor> {
    (0..blocks)
        .map(|n| {
            let side = 4 << n;
            Tensor::new(normal_vec(rng, batch * side * side), &[batch, 1, side, side])
        })
        .collect()
}

fn latent_batch<R: Rng + ?Sized>(rng: &mut R, batch: usize, dim: usize) -> Vec<f32> {
    normal_vec(rng, batch * dim)
}

/// Single images with optional style mixing among the active blocks.
fn single_inputs<R: Rng + ?Sized>(
    arch: &Architecture,
    mapping: &ParamStore,
    rng: &mut R,
    batch: usize,
    active: usize,
    mixing_prob: f64,
) -> Result<FakeInputs> {
    let cfg = &arch.config;
    let z1 = latent_batch(rng, batch, cfg.latent_dim);
    let z2 = latent_batch(rng, batch, cfg.latent_dim);
    let rules: Vec<MixingRule> = (0..batch).map(|_| MixingRule::sample(rng, mixing_prob, active)).collect();
    let noise_static = noise_batch(rng, batch, active);
    let noise_dynamic = noise_batch(rng, batch, active);
    let mixing = rules.iter().any(|r| *r != MixingRule::Single);
    let latents = Tensor::new(z1.clone(), &[batch, cfg.latent_dim]);
    let styles = if mixing {
        let mut z = z1;
        z.extend(z2);
        let w = arch.mapping.forward(mapping, &Tensor::new(z, &[2 * batch, cfg.latent_dim]))?;
        let w1 = w.narrow(0, 0, batch);
        let w2 = w.narrow(0, batch, batch);
        let diff = w1.sub(&w2);
        (1..=active)
            .map(|block| {
                let m: Vec<f32> = rules
                    .iter()
                    .map(|r| match r {
                        MixingRule::Crossover(p) if p[0] <= block => 0.0,
                        _ => 1.0,
                    })
                    .collect();
                w2.add(&diff.mul(&Tensor::new(m, &[batch, 1])))
            })
            .collect()
    } else {
        let w = arch.mapping.forward(mapping, &latents)?;
        vec![w; active]
    };
    Ok(FakeInputs {
        latents,
        styles,
        noise_static,
        noise_dynamic,
    })
}

/// `batch` generated pairs laid out as `[frames a; frames b]` in one batch of
/// `2 * batch`: shared static latent and static noise, independent dynamic parts.
pub fn fake_pair_inputs<R: Rng + ?Sized>(
    arch: &Architecture,
    mapping: &ParamStore,
    rng: &mut R,
    batch: usize,
    active: usize,
) -> Result<FakeInputs> {
    let cfg = &arch.config;
    let sd = cfg.static_dim();
    let dd = cfg.dynamic_dim;
    let z_st = latent_batch(rng, batch, sd);
    let z_dyn1 = latent_batch(rng, batch, dd);
    let z_dyn2 = latent_batch(rng, batch, dd);
    let mut z = Vec::with_capacity(2 * batch * cfg.latent_dim);
    for z_dyn in [&z_dyn1, &z_dyn2] {
        for i in 0..batch {
            z.extend_from_slice(&z_st[i * sd..(i + 1) * sd]);
            z.extend_from_slice(&z_dyn[i * dd..(i + 1) * dd]);
        }
    }
    let latents = Tensor::new(z, &[2 * batch, cfg.latent_dim]);
    let w = arch.mapping.forward(mapping, &latents)?;
    let st = noise_batch(rng, batch, active);
    let dyn1 = noise_batch(rng, batch, active);
    let dyn2 = noise_batch(rng, batch, active);
    Ok(FakeInputs {
        latents,
        styles: vec![w; active],
        noise_static: st.iter().map(|t| Tensor::concat(&[t.clone(), t.clone()], 0)).collect(),
        noise_dynamic: dyn1
            .into_iter()
            .zip(dyn2)
            .map(|(a, b)| Tensor::concat(&[a, b], 0))
            .collect(),
    })
}

fn fade(x: Tensor, active: usize, alpha: f32) -> Tensor {
    if active > 1 && alpha < 1.0 {
        let low = x.avg_pool2x().upsample2x();
        low.add(&x.sub(&low).mul_scalar(alpha))
    } else {
        x
    }
}

/// Progressive adversarial training against a static and a pairwise critic.
pub struct Trainer {
    pub bundle: ModelBundle,
    pub config: TrainingConfig,
    data: TrainingData,
    arch: Arc<Architecture>,
    rng: ChaCha8Rng,
    opt_mapping: Adam,
    opt_synthesis: Adam,
    opt_static: Adam,
    opt_pairwise: Adam,
    images_at: HashMap<usize, Arc<Vec<Image>>>,
    videos_at: HashMap<usize, Arc<Vec<Video>>>,
    cycler: Cycler,
}

impl Trainer {
    pub fn new(bundle: ModelBundle, config: TrainingConfig, data: TrainingData) -> Result<Self> {
        config.validate(bundle.config.num_blocks)?;
        data.validate()?;
        let adam = || Adam::new(1e-3, config.adam_beta1, config.adam_beta2);
        Ok(Self {
            arch: bundle.shared_arch(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            opt_mapping: adam(),
            opt_synthesis: adam(),
            opt_static: adam(),
            opt_pairwise: adam(),
            images_at: HashMap::new(),
            videos_at: HashMap::new(),
            cycler: Cycler {
                order: Vec::new(),
                pos: 0,
            },
            bundle,
            config,
            data,
        })
    }

    pub fn data(&self) -> &TrainingData {
        &self.data
    }

    fn images(&mut self, res: usize) -> Arc<Vec<Image>> {
        let data = &self.data;
        self.images_at
            .entry(res)
            .or_insert_with(|| Arc::new(data.images.iter().map(|i| i.center_crop_square().resize(res, res)).collect()))
            .clone()
    }

    fn videos(&mut self, res: usize) -> Arc<Vec<Video>> {
        let data = &self.data;
        self.videos_at
            .entry(res)
            .or_insert_with(|| {
                Arc::new(
                    data.videos
                        .iter()
                        .map(|v| Video {
                            id: v.id.clone(),
                            frames: v.frames.iter().map(|f| f.center_crop_square().resize(res, res)).collect(),
                        })
                        .collect(),
                )
            })
            .clone()
    }

    /// One critic update followed by one generator update on the same branch.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let arch = self.arch.clone();
        let n = arch.config.num_blocks;
        let samples = self.bundle.progress.samples_seen;
        let schedule = &self.config.schedule;
        let ph = schedule.phase_at(samples, n);
        let (k, alpha) = (ph.block, ph.alpha);
        let res = 4 << (k - 1);
        let setting = schedule.setting(res)?.clone();
        let proportion = schedule.pairwise_proportion(samples, n);
        let crop_p = schedule.crop_pair_probability;
        let b = setting.batch_size;
        for opt in [
            &mut self.opt_mapping,
            &mut self.opt_synthesis,
            &mut self.opt_static,
            &mut self.opt_pairwise,
        ] {
            opt.lr = setting.learning_rate;
        }
        let branch = if self.rng.random::<f64>() < proportion {
            Branch::Pairwise
        } else {
            Branch::Static
        };
        let do_r1 = self.bundle.progress.steps % self.config.r1_interval == 0 && self.config.r1_gamma > 0.0;
        let gamma = self.config.r1_gamma * self.config.r1_interval as f32;
        let fd_step = self.config.r1_fd_step;
        let gen_frozen = self.bundle.generator.frozen();
        let map_frozen = self.bundle.mapping.frozen();
        let mut crop_pairs = 0;
        let mut r1_value = 0.0;

        let (d_loss, g_loss) = match branch {
            Branch::Static => {
                let imgs = self.images(res);
                let picks: Vec<Image> = (0..b)
                    .map(|_| imgs[self.cycler.next(imgs.len(), &mut self.rng)].clone())
                    .collect();
                let reals = fade(Image::to_tensor(&picks)?, k, alpha);
                let fi = single_inputs(&arch, &map_frozen, &mut self.rng, b, k, self.config.style_mixing_prob)?;
                let fakes = arch
                    .synthesis
                    .forward(&gen_frozen, &fi.styles, &fi.noise_static, &fi.noise_dynamic, k, alpha)?;
                let d = &arch.d_static;
                let store = self.bundle.d_static.clone();
                let frozen = store.frozen();
                let real_logits = d.forward(&store, std::slice::from_ref(&reals), k, alpha)?;
                let fake_logits = d.forward(&store, &[fakes], k, alpha)?;
                let dl = discriminator_loss(&real_logits, &fake_logits)?;
                let mut total = dl.clone();
                if do_r1 {
                    let real = [reals];
                    let r1 = r1_penalty(|x| d.forward(&frozen, x, k, alpha), &real, gamma)?;
                    r1_value = r1.penalty;
                    total = total.add(&r1_surrogate(|x| d.forward(&store, x, k, alpha), &real, &r1, gamma, fd_step)?);
                }
                self.opt_static.step(&mut self.bundle.d_static, &total.backward());

                let gi = single_inputs(&arch, &self.bundle.mapping, &mut self.rng, b, k, self.config.style_mixing_prob)?;
                let img = arch
                    .synthesis
                    .forward(&self.bundle.generator, &gi.styles, &gi.noise_static, &gi.noise_dynamic, k, alpha)?;
                let logits = d.forward(&self.bundle.d_static.frozen(), &[img], k, alpha)?;
                let gl = generator_loss(&logits)?;
                let grads = gl.backward();
                self.opt_mapping.step(&mut self.bundle.mapping, &grads);
                self.opt_synthesis.step(&mut self.bundle.generator, &grads);
                (dl.item(), gl.item())
            }
            Branch::Pairwise => {
                let vids = self.videos(res);
                let big = self.videos(2 * res);
                let mut ra = Vec::with_capacity(b);
                let mut rb = Vec::with_capacity(b);
                for _ in 0..b {
                    let (v, i, j) = sample_real_indices(&vids, &mut self.rng)?;
                    ra.push(vids[v].frames[i].clone());
                    rb.push(vids[v].frames[j].clone());
                }
                let real = [
                    fade(Image::to_tensor(&ra)?, k, alpha),
                    fade(Image::to_tensor(&rb)?, k, alpha),
                ];
                let mut ca = Vec::new();
                let mut cb = Vec::new();
                for _ in 0..b {
                    if self.rng.random::<f64>() < crop_p {
                        let (v, i, _) = sample_real_indices(&big, &mut self.rng)?;
                        let p = sample_crop_pair(&big[v].frames[i], res, &mut self.rng)?;
                        ca.push(p.frame_a);
                        cb.push(p.frame_b);
                    }
                }
                crop_pairs = ca.len();
                let n_fake = b - crop_pairs;
                let mut fa = Vec::new();
                let mut fb = Vec::new();
                if n_fake > 0 {
                    let pi = fake_pair_inputs(&arch, &map_frozen, &mut self.rng, n_fake, k)?;
                    let out = arch
                        .synthesis
                        .forward(&gen_frozen, &pi.styles, &pi.noise_static, &pi.noise_dynamic, k, alpha)?;
                    fa.push(out.narrow(0, 0, n_fake));
                    fb.push(out.narrow(0, n_fake, n_fake));
                }
                if crop_pairs > 0 {
                    fa.push(fade(Image::to_tensor(&ca)?, k, alpha));
                    fb.push(fade(Image::to_tensor(&cb)?, k, alpha));
                }
                let fake = [Tensor::concat(&fa, 0), Tensor::concat(&fb, 0)];
                let d = &arch.d_pairwise;
                let store = self.bundle.d_pairwise.clone();
                let frozen = store.frozen();
                let real_logits = d.forward(&store, &real, k, alpha)?;
                let fake_logits = d.forward(&store, &fake, k, alpha)?;
                let dl = discriminator_loss(&real_logits, &fake_logits)?;
                let mut total = dl.clone();
                if do_r1 {
                    let r1 = r1_penalty(|x| d.forward(&frozen, x, k, alpha), &real, gamma)?;
                    r1_value = r1.penalty;
                    total = total.add(&r1_surrogate(|x| d.forward(&store, x, k, alpha), &real, &r1, gamma, fd_step)?);
                }
                self.opt_pairwise.step(&mut self.bundle.d_pairwise, &total.backward());

                let pi = fake_pair_inputs(&arch, &self.bundle.mapping, &mut self.rng, b, k)?;
                let out = arch
                    .synthesis
                    .forward(&self.bundle.generator, &pi.styles, &pi.noise_static, &pi.noise_dynamic, k, alpha)?;
                let pair = [out.narrow(0, 0, b), out.narrow(0, b, b)];
                let logits = d.forward(&self.bundle.d_pairwise.frozen(), &pair, k, alpha)?;
                let gl = generator_loss(&logits)?;
                let grads = gl.backward();
                self.opt_mapping.step(&mut self.bundle.mapping, &grads);
                self.opt_synthesis.step(&mut self.bundle.generator, &grads);
                (dl.item(), gl.item())
            }
        };
        if !d_loss.is_finite() || !g_loss.is_finite() || !r1_value.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss at step {}: d {d_loss}, g {g_loss}, r1 {r1_value}",
                self.bundle.progress.steps
            )));
        }
        let a = self.config.ema_alpha;
        ema_update(&mut self.bundle.ema_mapping, &self.bundle.mapping, a)?;
        ema_update(&mut self.bundle.ema_generator, &self.bundle.generator, a)?;

        let metrics = StepMetrics {
            step: self.bundle.progress.steps,
            samples_seen: samples,
            phase: ph.index,
            phase_kind: ph.kind,
            resolution: res,
            alpha,
            batch_size: b,
            learning_rate: setting.learning_rate,
            pairwise_proportion: proportion,
            branch,
            crop_pairs,
            d_loss,
            g_loss,
            r1: r1_value,
        };
        let p = &mut self.bundle.progress;
        p.samples_seen += b as u64;
        p.steps += 1;
        p.active_blocks = k;
        p.alpha = alpha;
        Ok(metrics)
    }

    /// Runs `steps` updates, reporting each to `log` when given.
    pub fn run(&mut self, steps: u64, log: Option<&MetricsLog>) -> Result<Vec<StepMetrics>> {
        let mut out = Vec::with_capacity(steps as usize);
        for _ in 0..steps {
            let m = self.step()?;
            if let Some(log) = log {
                log.append(&m)?;
            }
            if m.step % 100 == 0 {
                log::info!(
                    "step {} res {} alpha {:.3} {:?} d {:.4} g {:.4} r1 {:.4}",
                    m.step,
                    m.resolution,
                    m.alpha,
                    m.branch,
                    m.d_loss,
                    m.g_loss,
                    m.r1
                );
            }
            out.push(m);
        }
        Ok(out)
    }

    /// Bundle, optimizer moments and random stream in one archive.
    pub fn to_archive(&self) -> Result<Archive> {
        let mut archive = self.bundle.to_archive()?;
        archive.kind = "training_state".into();
        let mut steps = BTreeMap::new();
        for (name, opt) in self.optimizers() {
            let (m, v, t) = opt.export_state();
            archive.groups.push((format!("adam.{name}.m"), m));
            archive.groups.push((format!("adam.{name}.v"), v));
            steps.insert(name.to_string(), t);
        }
        archive.meta["training"] = serde_json::json!({
            "config": self.config,
            "adam_steps": steps,
            "rng_seed": self.rng.get_seed(),
            "rng_word_pos": self.rng.get_word_pos().to_string(),
            "cycler_order": self.cycler.order,
            "cycler_pos": self.cycler.pos,
        });
        Ok(archive)
    }

    fn optimizers(&self) -> [(&'static str, &Adam); 4] {
        [
            ("mapping", &self.opt_mapping),
            ("synthesis", &self.opt_synthesis),
            ("static", &self.opt_static),
            ("pairwise", &self.opt_pairwise),
        ]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_archive()?.save(path)
    }

    /// Resumes from [`Trainer::save`] output; continuing is bit-identical to
    /// never having stopped.
    pub fn resume(archive: &Archive, data: TrainingData) -> Result<Self> {
        archive.expect_kind("training_state")?;
        let mut as_bundle = archive.clone();
        as_bundle.kind = "model_bundle".into();
        let bundle = ModelBundle::from_archive(&as_bundle)?;
        let t = &archive.meta["training"];
        let config: TrainingConfig = serde_json::from_value(t["config"].clone())?;
        let mut trainer = Trainer::new(bundle, config, data)?;
        let steps: BTreeMap<String, BTreeMap<String, u64>> = serde_json::from_value(t["adam_steps"].clone())?;
        for (name, opt) in [
            ("mapping", &mut trainer.opt_mapping),
            ("synthesis", &mut trainer.opt_synthesis),
            ("static", &mut trainer.opt_static),
            ("pairwise", &mut trainer.opt_pairwise),
        ] {
            let m = archive.group(&format!("adam.{name}.m"))?;
            let v = archive.group(&format!("adam.{name}.v"))?;
            let empty = BTreeMap::new();
            opt.import_state(m, v, steps.get(name).unwrap_or(&empty));
        }
        let seed: [u8; 32] = serde_json::from_value(t["rng_seed"].clone())?;
        let pos: u128 = t["rng_word_pos"]
            .as_str()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad rng position".into()))?;
        trainer.rng = ChaCha8Rng::from_seed(seed);
        trainer.rng.set_word_pos(pos);
        trainer.cycler.order = serde_json::from_value(t["cycler_order"].clone())?;
        trainer.cycler.pos = serde_json::from_value(t["cycler_pos"].clone())?;
        Ok(trainer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeneratorConfig;
    use crate::pipeline::synthetic::SyntheticCorpus;

    fn tiny_setup() -> (ModelBundle, TrainingConfig, TrainingData) {
        let cfg = GeneratorConfig {
            channel_widths: vec![8, 8, 4],
            mapping_depth: 2,
            ..GeneratorConfig::with_width_factor(3, 1.0)
        };
        let mut tc = TrainingConfig::toy();
        tc.schedule.transition_samples = 40;
        tc.schedule.stabilization_samples = 40;
        let data = SyntheticCorpus {
            image_side: 16,
            frame_side: 32,
            images: 6,
            videos: 2,
            frames_per_video: 3,
            seed: 1,
        }
        .build();
        (ModelBundle::new(&cfg, 3).unwrap(), tc, data)
    }

    #[test]
    fn short_run_is_finite_and_moves_ema() {
        let (bundle, mut tc, data) = tiny_setup();
        tc.schedule.balancing = crate::training::BalancingMode::Fixed { proportion: 0.5 };
        let mut t = Trainer::new(bundle, tc, data).unwrap();
        let ms = t.run(40, None).unwrap();
        assert!(ms.iter().all(|m| m.d_loss.is_finite() && m.g_loss.is_finite()));
        assert_eq!(ms.last().unwrap().resolution, 16);
        assert!(ms.iter().any(|m| m.branch == Branch::Pairwise));
        assert!(!t.bundle.ema_generator.bit_eq(&t.bundle.generator.frozen()));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (bundle, tc, data) = tiny_setup();
        let mut a = Trainer::new(bundle.clone(), tc.clone(), data.clone()).unwrap();
        a.run(6, None).unwrap();
        let saved = Archive::from_bytes(&a.to_archive().unwrap().to_bytes().unwrap()).unwrap();
        a.run(4, None).unwrap();
        let mut b = Trainer::resume(&saved, data).unwrap();
        b.run(4, None).unwrap();
        assert!(a.bundle.bit_eq(&b.bundle));
    }

    #[test]
    fn missing_videos_are_rejected() {
        let (bundle, tc, mut data) = tiny_setup();
        data.videos.clear();
        assert!(matches!(Trainer::new(bundle, tc, data), Err(Error::Data(_))));
    }
}
