use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use tensor::{Adam, Linear, ParamStore, Tensor};

use crate::error::{Error, Result};
use crate::model::checkpoint::Archive;
use crate::model::{GeneratorView, LatentCode, StyleSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleShifterConfig {
    pub hidden: Vec<usize>,
    /// Size of the mapped training pool; a fresh pool is drawn after each pass.
    pub samples: usize,
    pub heldout: usize,
    pub batch_size: usize,
    pub max_steps: usize,
    pub learning_rate: f32,
    pub rel_weight: f32,
    /// Held-out evaluations without improvement before stopping.
    pub plateau_patience: usize,
    pub eval_every: usize,
    pub seed: u64,
}

impl StyleShifterConfig {
    pub fn paper() -> Self {
        Self {
            hidden: vec![512, 512],
            samples: 100_000,
            heldout: 2_000,
            batch_size: 64,
            max_steps: 50_000,
            learning_rate: 1e-3,
            rel_weight: 0.1,
            plateau_patience: 10,
            eval_every: 500,
            seed: 0,
        }
    }

    pub fn toy() -> Self {
        Self {
            samples: 4_096,
            heldout: 512,
            max_steps: 1_500,
            eval_every: 100,
            plateau_patience: 4,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&h| h == 0) || self.samples == 0 || self.heldout == 0 || self.batch_size == 0 {
            return Err(Error::Config("style shifter sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.rel_weight >= 0.0) || self.eval_every == 0 {
            return Err(Error::Config("style shifter rates must be positive".into()));
        }
        Ok(())
    }
}

/// Training tuples: `target = M(z_st_a, z_dyn_a * sqrt(1 - c) + z_b * sqrt(c))`.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleShiftSamples {
    pub style_dim: usize,
    pub dynamic_dim: usize,
    pub w_a: Vec<f32>,
    /// `M(z_st_a, z_b)`, the `c = 1` endpoint.
    pub w_b: Vec<f32>,
    pub z_b: Vec<f32>,
    pub c: Vec<f32>,
    pub target: Vec<f32>,
}

impl StyleShiftSamples {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    fn rows(&self, v: &[f32], width: usize, idx: &[usize]) -> Tensor {
        let data = idx.iter().flat_map(|&i| v[i * width..(i + 1) * width].iter().copied()).collect();
        Tensor::new(data, &[idx.len(), width])
    }
}

/// Norm-preserving mix of two dynamic latents.
pub fn mix_dynamic(z_a: &[f32], z_b: &[f32], c: f64) -> Vec<f32> {
    let (ka, kb) = ((1.0 - c).sqrt(), c.sqrt());
    z_a.iter().zip(z_b).map(|(a, b)| (*a as f64 * ka + *b as f64 * kb) as f32).collect()
}

pub fn shift_samples(view: &GeneratorView<'_>, count: usize, seed: u64) -> Result<StyleShiftSamples> {
    let cfg = view.config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = StyleShiftSamples {
        style_dim: cfg.style_dim,
        dynamic_dim: cfg.dynamic_dim,
        w_a: Vec::new(),
        w_b: Vec::new(),
        z_b: Vec::new(),
        c: Vec::new(),
        target: Vec::new(),
    };
    while out.len() < count {
        let n = (count - out.len()).min(256);
        let mut codes = Vec::with_capacity(3 * n);
        for _ in 0..n {
            let a = LatentCode::sample(&mut rng, cfg);
            let z_b: Vec<f32> = (0..cfg.dynamic_dim).map(|_| rng.sample(StandardNormal)).collect();
            let c: f64 = rng.random();
            codes.push(a.with_dynamic(mix_dynamic(&a.z_dynamic, &z_b, c)));
            codes.push(a.with_dynamic(z_b.clone()));
            out.z_b.extend(&z_b);
            out.c.push(c as f32);
            codes.push(a);
        }
        let ws = view.map_batch(&codes)?;
        for t in ws.chunks(3) {
            out.target.extend(&t[0]);
            out.w_b.extend(&t[1]);
            out.w_a.extend(&t[2]);
        }
    }
    Ok(out)
}

/// L1 distance between predicted and target styles, averaged over rows.
pub fn abs_loss(pred: &Tensor, target: &Tensor) -> Tensor {
    pred.sub(target).abs().sum_keepdim(&[1]).mean_all()
}

/// Mean over rows of `1 - cos(target - w_a, pred - w_a)`; rows whose target
/// direction is zero contribute nothing.
pub fn rel_loss(pred: &Tensor, w_a: &Tensor, target: &Tensor) -> Tensor {
    let p = pred.sub(w_a);
    let d = target.sub(w_a).detach();
    let dd = d.square().sum_keepdim(&[1]);
    let keep: Vec<f32> = dd.data().iter().map(|&v| (v > 0.0) as u8 as f32).collect();
    let keep = Tensor::new(keep, dd.shape());
    let pp = p.square().sum_keepdim(&[1]);
    let dot = p.mul(&d).sum_keepdim(&[1]);
    let cos = dot.div(&pp.mul(&dd).clamp(1e-30, f32::MAX).sqrt());
    keep.sub(&cos.mul(&keep)).mean_all()
}

/// Residual MLP `A(w_a, z_b, c) = w_a + f(w_a, z_b, c)` approximating how the
/// mapping network moves a style when the dynamic latent is mixed toward `z_b`.
#[derive(Clone, Debug)]
pub struct StyleShifter {
    pub config: StyleShifterConfig,
    pub style_dim: usize,
    pub dynamic_dim: usize,
    pub params: ParamStore,
    /// Per-dimension mean and standard deviation of `w_a` over the training pool.
    pub input_mean: Vec<f32>,
    pub input_std: Vec<f32>,
    layers: Vec<Linear>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShifterReport {
    pub steps: usize,
    pub heldout_losses: Vec<f64>,
    pub endpoints: EndpointReport,
}

/// Held-out endpoint errors, as mean Euclidean norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    /// `|A(w_a, z_b, 0) - w_a|`
    pub start_error: f64,
    /// `|A(w_a, z_b, 1) - w_b|`
    pub end_error: f64,
    /// `|w_b - w_a|`
    pub shift: f64,
}

impl StyleShifter {
    pub const KIND: &'static str = "style_shifter";

    pub fn new(config: &StyleShifterConfig, style_dim: usize, dynamic_dim: usize) -> Result<Self> {
        config.validate()?;
        let mut dims = vec![style_dim + dynamic_dim + 1];
        dims.extend(&config.hidden);
        dims.push(style_dim);
        let last = dims.len() - 2;
        let layers: Vec<Linear> = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let l = Linear::new(format!("shift.fc{i}"), d[0], d[1]);
                if i == last {
                    l.with_gain(0.1)
                } else {
                    l
                }
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5417);
        let mut params = ParamStore::new();
        for l in &layers {
            l.init(&mut params, 0.0, &mut rng);
        }
        Ok(Self {
            config: config.clone(),
            style_dim,
            dynamic_dim,
            params,
            input_mean: vec![0.0; style_dim],
            input_std: vec![1.0; style_dim],
            layers,
        })
    }

    fn forward(&self, params: &ParamStore, w_a: &Tensor, z_b: &Tensor, c: &Tensor) -> Tensor {
        let d = self.style_dim;
        let mean = Tensor::new(self.input_mean.clone(), &[1, d]);
        let inv_std = Tensor::new(self.input_std.iter().map(|s| 1.0 / s).collect(), &[1, d]);
        let w_in = w_a.sub(&mean).mul(&inv_std);
        let mut h = Tensor::concat(&[w_in, z_b.clone(), c.clone()], 1);
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(params, &h);
            if i + 1 < self.layers.len() {
                h = h.leaky_relu(0.2);
            }
        }
        w_a.add(&h)
    }

    fn check(&self, z_b: &[f32], c: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Argument(format!("interpolation coefficient {c} outside [0, 1]")));
        }
        if z_b.len() != self.dynamic_dim {
            return Err(Error::Dimension(format!("target latent has {} entries, expected {}", z_b.len(), self.dynamic_dim)));
        }
        Ok(())
    }

    /// Moves every row of `styles` toward `z_b` by coefficient `c`.
    pub fn shift_rows(&self, styles: &[Vec<f32>], z_b: &[f32], c: f64) -> Result<Vec<Vec<f32>>> {
        self.check(z_b, c)?;
        if styles.iter().any(|s| s.len() != self.style_dim) {
            return Err(Error::Dimension(format!("styles must have {} entries", self.style_dim)));
        }
        let n = styles.len();
        let w = Tensor::new(styles.concat(), &[n, self.style_dim]);
        let z = Tensor::new(z_b.repeat(n), &[n, self.dynamic_dim]);
        let cc = Tensor::full(&[n, 1], c as f32);
        let out = self.forward(&self.params.frozen(), &w, &z, &cc);
        Ok(out.data().chunks(self.style_dim).map(|r| r.to_vec()).collect())
    }

    pub fn shift_style(&self, w_a: &[f32], z_b: &[f32], c: f64) -> Result<Vec<f32>> {
        Ok(self.shift_rows(&[w_a.to_vec()], z_b, c)?.remove(0))
    }

    /// Applies the shift to each per-resolution style independently.
    pub fn shift_styles(&self, styles: &StyleSet, z_b: &[f32], c: f64) -> Result<StyleSet> {
        Ok(StyleSet {
            styles: self.shift_rows(&styles.styles, z_b, c)?,
        })
    }

    fn batch_loss(&self, params: &ParamStore, s: &StyleShiftSamples, idx: &[usize]) -> Tensor {
        let w_a = s.rows(&s.w_a, s.style_dim, idx);
        let z_b = s.rows(&s.z_b, s.dynamic_dim, idx);
        let c = s.rows(&s.c, 1, idx);
        let target = s.rows(&s.target, s.style_dim, idx);
        let pred = self.forward(params, &w_a, &z_b, &c);
        abs_loss(&pred, &target).add(&rel_loss(&pred, &w_a, &target).mul_scalar(self.config.rel_weight))
    }

    fn heldout_loss(&self, s: &StyleShiftSamples) -> f64 {
        let frozen = self.params.frozen();
        let idx: Vec<usize> = (0..s.len()).collect();
        let mut total = 0.0;
        for chunk in idx.chunks(256) {
            total += self.batch_loss(&frozen, s, chunk).item() as f64 * chunk.len() as f64;
        }
        total / s.len() as f64
    }

    pub fn endpoints(&self, s: &StyleShiftSamples) -> Result<EndpointReport> {
        let d = self.style_dim;
        let rows = |v: &[f32]| -> Vec<Vec<f32>> { v.chunks(d).map(|r| r.to_vec()).collect() };
        let norm = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt();
        let (w_a, w_b) = (rows(&s.w_a), rows(&s.w_b));
        let (mut start, mut end, mut shift) = (0.0, 0.0, 0.0);
        for i in 0..s.len() {
            let z = &s.z_b[i * s.dynamic_dim..(i + 1) * s.dynamic_dim];
            let a0 = self.shift_style(&w_a[i], z, 0.0)?;
            let a1 = self.shift_style(&w_a[i], z, 1.0)?;
            start += norm(&a0, &w_a[i]);
            end += norm(&a1, &w_b[i]);
            shift += norm(&w_b[i], &w_a[i]);
        }
        let n = s.len() as f64;
        Ok(EndpointReport {
            start_error: start / n,
            end_error: end / n,
            shift: shift / n,
        })
    }

    pub fn to_archive(&self) -> Archive {
        Archive::new(
            Self::KIND,
            serde_json::json!({
                "config": self.config,
                "style_dim": self.style_dim,
                "dynamic_dim": self.dynamic_dim,
                "input_mean": self.input_mean,
                "input_std": self.input_std,
            }),
        )
        .with_group("params", &self.params)
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        archive.expect_kind(Self::KIND)?;
        let m = &archive.meta;
        let config: StyleShifterConfig = serde_json::from_value(m["config"].clone())?;
        let dim = |k: &str| {
            m[k].as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Format(format!("style shifter archive lacks `{k}`")))
        };
        let mut s = Self::new(&config, dim("style_dim")?, dim("dynamic_dim")?)?;
        s.input_mean = serde_json::from_value(m["input_mean"].clone())?;
        s.input_std = serde_json::from_value(m["input_std"].clone())?;
        if s.input_mean.len() != s.style_dim || s.input_std.len() != s.style_dim || s.input_std.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Format("style shifter normalization is malformed".into()));
        }
        let params = archive.group("params")?;
        if !s.params.same_layout(params) {
            return Err(Error::Format("style shifter weights do not match their configuration".into()));
        }
        s.params = params.clone();
        s.params.set_trainable(true);
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_archive(&Archive::load(path)?)
    }
}

/// Trains the shifter against the frozen mapping network of `view`, keeping
/// the iterate with the lowest held-out loss and stopping on a plateau.
pub fn train_style_shifter(view: &GeneratorView<'_>, config: &StyleShifterConfig) -> Result<(StyleShifter, ShifterReport)> {
    config.validate()?;
    let cfg = view.config();
    let mut shifter = StyleShifter::new(config, cfg.style_dim, cfg.dynamic_dim)?;
    let held = shift_samples(view, config.heldout, config.seed)?;
    let mut train = shift_samples(view, config.samples, config.seed.wrapping_add(1))?;
    let mut refreshes = 1u64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Adam::new(config.learning_rate, 0.9, 0.999);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    let mut best = (shifter.heldout_loss(&held), shifter.params.clone());
    let mut losses = vec![best.0];
    let mut stale = 0;
    let mut steps = 0;
    while steps < config.max_steps {
        if cursor + config.batch_size > order.len() {
            if cursor < order.len() || steps > 0 {
                refreshes += 1;
                train = shift_samples(view, config.samples, config.seed.wrapping_add(refreshes))?;
            }
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let idx = &order[cursor..(cursor + config.batch_size).min(order.len())];
        cursor += config.batch_size;
        let loss = shifter.batch_loss(&shifter.params, &train, idx);
        if !loss.all_finite() {
            return Err(Error::Numeric(format!("style shifter loss diverged at step {steps}")));
        }
        let grads = loss.backward();
        opt.step(&mut shifter.params, &grads);
        steps += 1;
        if steps % config.eval_every == 0 {
            let l = shifter.heldout_loss(&held);
            log::info!("style shifter step {steps}: held-out loss {l:.5}");
            losses.push(l);
            if l < best.0 {
                best = (l, shifter.params.clone());
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.plateau_patience {
                    break;
                }
            }
        }
    }
    shifter.params = best.1;
    let endpoints = shifter.endpoints(&held)?;
    Ok((
        shifter,
        ShifterReport {
            steps,
            heldout_losses: losses,
            endpoints,
        },
    ))
}
