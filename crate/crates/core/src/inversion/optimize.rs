use serde::{Deserialize, Serialize};
use tensor::{Adam, ParamStore, Tensor};

use super::config::{InversionConfig, VariantSpec};
use crate::error::{Error, Result};
use crate::imaging::{Image, Mask};
use crate::metrics::{perceptual_tensor, FeatureExtractor};
use crate::model::{GeneratorView, ModelBundle, NoiseMap, SpatialNoiseSet, StyleSet};

/// Learning-rate halving on plateaus, with optional early stopping.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub best: f64,
    pub since_improvement: usize,
    since_change: usize,
    halving_patience: usize,
    stop_patience: Option<usize>,
}

impl PlateauSchedule {
    pub fn new(lr: f64, halving_patience: usize, stop_patience: Option<usize>) -> Self {
        Self {
            lr,
            best: f64::INFINITY,
            since_improvement: 0,
            since_change: 0,
            halving_patience,
            stop_patience,
        }
    }

    /// Records the loss of the iteration just taken; true means stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.since_improvement = 0;
            self.since_change = 0;
            return false;
        }
        self.since_improvement += 1;
        self.since_change += 1;
        if self.since_change >= self.halving_patience {
            self.lr *= 0.5;
            self.since_change = 0;
        }
        self.stop_patience.is_some_and(|p| self.since_improvement >= p)
    }
}

/// Which noise maps an iteration may update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    All,
    Static,
    Dynamic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub loss: f64,
    pub reconstruction: f64,
    pub style_penalty: f64,
    pub lr: f64,
    pub region: Region,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeOutcome {
    pub styles: StyleSet,
    pub noise: SpatialNoiseSet,
    pub trace: Vec<IterRecord>,
    pub stopped_early: bool,
}

pub(crate) fn style_name(n: usize) -> String {
    format!("w.{n}")
}

fn noise_name(dynamic: bool, n: usize) -> String {
    if dynamic {
        format!("s_dyn.{n}")
    } else {
        format!("s_st.{n}")
    }
}

/// Latents as a trainable store: `w.n` `[1, D]`, `s_st.n` and `s_dyn.n` `[1, 1, s, s]`.
pub(crate) fn latent_store(styles: &StyleSet, noise: &SpatialNoiseSet) -> ParamStore {
    let mut store = ParamStore::new();
    for (n, w) in styles.styles.iter().enumerate() {
        store.insert(style_name(n), w.clone(), &[1, w.len()]);
    }
    for (dynamic, maps) in [(false, &noise.static_maps), (true, &noise.dynamic_maps)] {
        for (n, m) in maps.iter().enumerate() {
            store.insert(noise_name(dynamic, n), m.data.clone(), &[1, 1, m.side, m.side]);
        }
    }
    store
}

pub(crate) fn read_latents(store: &ParamStore, blocks: usize) -> (StyleSet, SpatialNoiseSet) {
    let styles = StyleSet {
        styles: (0..blocks).map(|n| store.get(&style_name(n)).to_vec()).collect(),
    };
    let maps = |dynamic| {
        (0..blocks)
            .map(|n| {
                let t = store.get(&noise_name(dynamic, n));
                NoiseMap {
                    side: t.shape()[3],
                    data: t.to_vec(),
                }
            })
            .collect()
    };
    (
        styles,
        SpatialNoiseSet {
            static_maps: maps(false),
            dynamic_maps: maps(true),
        },
    )
}

/// Adam over latents with the noise step size scaled by `noise_scale`
/// relative to the styles.
pub fn latent_optimizer(lr: f64, noise_scale: f64) -> Adam {
    let mut opt = Adam::new(lr as f32, 0.9, 0.999);
    opt.set_lr_multiplier("s_", noise_scale as f32);
    opt
}

fn generator_inputs(store: &ParamStore, blocks: usize) -> (Vec<Tensor>, Vec<Tensor>, Vec<Tensor>) {
    let get = |f: &dyn Fn(usize) -> String| (0..blocks).map(|n| store.get(&f(n)).clone()).collect::<Vec<_>>();
    (get(&style_name), get(&|n| noise_name(false, n)), get(&|n| noise_name(true, n)))
}

/// `[1, 1, H, W]` tensor equal to one where the mask selects the region.
fn region_tensor(mask: &Mask, keep_static: bool) -> Tensor {
    let data = (0..mask.width * mask.height)
        .map(|i| (mask.is_static(i % mask.width, i / mask.width) == keep_static) as u8 as f32)
        .collect();
    Tensor::new(data, &[1, 1, mask.height, mask.width])
}

/// `MAE + coeff * PL` between a rendered batch and a target, optionally
/// restricted to one mask region by zeroing the rest of both images.
pub fn reconstruction_loss(
    extractor: &dyn FeatureExtractor,
    rendered: &Tensor,
    target: &Tensor,
    perceptual_coeff: f64,
    region: Option<(&Mask, bool)>,
) -> Result<Tensor> {
    let (y, x) = match region {
        Some((m, keep)) => {
            let r = region_tensor(m, keep);
            (rendered.mul(&r), target.mul(&r))
        }
        None => (rendered.clone(), target.clone()),
    };
    let mae = y.sub(&x).abs().mean_all();
    let pl = perceptual_tensor(extractor, &y, &x)?;
    Ok(mae.add(&pl.mul_scalar(perceptual_coeff as f32)))
}

/// Zeroes static noise over dynamic pixels and dynamic noise over static ones.
pub fn project_noise(noise: &mut SpatialNoiseSet, mask: &Mask) {
    for (dynamic, maps) in [(false, &mut noise.static_maps), (true, &mut noise.dynamic_maps)] {
        for m in maps.iter_mut() {
            let small = mask.resize_nearest(m.side, m.side);
            for y in 0..m.side {
                for x in 0..m.side {
                    if small.is_static(x, y) == dynamic {
                        m.data[y * m.side + x] = 0.0;
                    }
                }
            }
        }
    }
}

fn project_store(store: &mut ParamStore, mask: &Mask, blocks: usize) {
    let (_, mut noise) = read_latents(store, blocks);
    project_noise(&mut noise, mask);
    for n in 0..blocks {
        store.set_data(&noise_name(false, n), noise.static_maps[n].data.clone());
        store.set_data(&noise_name(true, n), noise.dynamic_maps[n].data.clone());
    }
}

/// Optimizes styles and noise so the generator reproduces `target`, starting
/// from `init_styles`/`init_noise`. With `mask` (segmentation variant) even
/// iterations fit the static region and update static noise, odd ones fit
/// the dynamic region and update dynamic noise; no early stopping then.
pub fn optimize_latents(
    view: &GeneratorView<'_>,
    target: &Image,
    init_styles: &StyleSet,
    init_noise: &SpatialNoiseSet,
    spec: &VariantSpec,
    config: &InversionConfig,
    extractor: &dyn FeatureExtractor,
    mask: Option<&Mask>,
) -> Result<OptimizeOutcome> {
    config.validate()?;
    let cfg = view.config();
    init_styles.validate(cfg)?;
    init_noise.validate(cfg)?;
    let res = cfg.final_resolution();
    if target.width != res || target.height != res {
        return Err(Error::Shape(format!("target is {}x{}, model renders {res}x{res}", target.width, target.height)));
    }
    let mask = match (spec.segmentation, mask) {
        (true, None) => return Err(Error::Config("segmentation-guided inversion needs a mask".into())),
        (true, Some(m)) if m.width != res || m.height != res => {
            return Err(Error::Shape("mask differs from target size".into()))
        }
        (true, Some(m)) => Some(m),
        (false, _) => None,
    };
    let blocks = cfg.num_blocks;
    let mut noise0 = init_noise.clone();
    if let Some(m) = mask {
        project_noise(&mut noise0, m);
    }
    let mut store = latent_store(init_styles, &noise0);
    if !spec.optimizes() || config.max_iters == 0 {
        let (styles, noise) = read_latents(&store, blocks);
        return Ok(OptimizeOutcome {
            styles,
            noise,
            trace: Vec::new(),
            stopped_early: false,
        });
    }
    let x = Image::to_tensor(std::slice::from_ref(target))?.detach();
    let anchor: Vec<Tensor> = init_styles
        .styles
        .iter()
        .map(|w| Tensor::new(w.clone(), &[1, w.len()]))
        .collect();
    let mut opt = latent_optimizer(config.initial_lr, config.noise_grad_scale);
    let stop = if spec.segmentation { None } else { Some(config.early_stop_patience) };
    let mut schedule = PlateauSchedule::new(config.initial_lr, config.plateau_halving_patience, stop);
    let mut trace = Vec::with_capacity(config.max_iters);
    let mut stopped_early = false;
    for iter in 0..config.max_iters {
        let region = match mask {
            None => Region::All,
            Some(_) if iter % 2 == 0 => Region::Static,
            Some(_) => Region::Dynamic,
        };
        let (styles, st, dy) = generator_inputs(&store, blocks);
        let y = view.synthesize_tensors(&styles, &st, &dy)?;
        let masked = mask.map(|m| (m, region == Region::Static));
        let rec = reconstruction_loss(extractor, &y, &x, config.perceptual_coeff, masked)?;
        let penalty = if spec.init_penalty {
            let mut sum = Tensor::scalar(0.0);
            for (w, a) in styles.iter().zip(&anchor) {
                sum = sum.add(&w.sub(a).square().mean_all());
            }
            Some(sum.mul_scalar((config.style_penalty_coeff / blocks as f64) as f32))
        } else {
            None
        };
        let loss = penalty.as_ref().map_or_else(|| rec.clone(), |p| rec.add(p));
        let value = loss.item() as f64;
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "latent loss became non-finite at iteration {iter}; last finite losses: {:?}",
                trace.iter().rev().take(5).map(|r: &IterRecord| r.loss).collect::<Vec<_>>()
            )));
        }
        let grads = loss.backward();
        let mut updates = Vec::new();
        if spec.optimize_styles {
            updates.extend(styles.iter().enumerate().filter_map(|(n, t)| grads.get(t).map(|g| (style_name(n), g.to_vec()))));
        }
        if spec.optimize_noise {
            for (dynamic, maps) in [(false, &st), (true, &dy)] {
                let wanted = match region {
                    Region::All => true,
                    Region::Static => !dynamic,
                    Region::Dynamic => dynamic,
                };
                if wanted {
                    updates.extend(
                        maps.iter()
                            .enumerate()
                            .filter_map(|(n, t)| grads.get(t).map(|g| (noise_name(dynamic, n), g.to_vec()))),
                    );
                }
            }
        }
        opt.lr = schedule.lr as f32;
        trace.push(IterRecord {
            iter,
            loss: value,
            reconstruction: rec.item() as f64,
            style_penalty: penalty.map_or(0.0, |p| p.item() as f64),
            lr: schedule.lr,
            region,
        });
        opt.step_named(&mut store, updates);
        if let Some(m) = mask {
            project_store(&mut store, m, blocks);
        }
        if schedule.observe(value) {
            stopped_early = true;
            break;
        }
    }
    let (styles, noise) = read_latents(&store, blocks);
    Ok(OptimizeOutcome {
        styles,
        noise,
        trace,
        stopped_early,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub iter: usize,
    pub loss: f64,
    pub mae: f64,
}

#[derive(Clone, Debug)]
pub struct FinetuneOutcome {
    /// Synthesis weights of the best iterate.
    pub synthesis: ParamStore,
    pub trace: Vec<FinetuneRecord>,
    pub best_iter: usize,
    pub diverged: bool,
}

/// Adjusts the averaged synthesis weights with latents frozen, minimizing
/// `MAE + weight * PL`. Returns the best iterate; stops when the loss
/// exceeds ten times its initial value.
pub fn finetune_generator(
    bundle: &ModelBundle,
    target: &Image,
    styles: &StyleSet,
    noise: &SpatialNoiseSet,
    config: &InversionConfig,
    extractor: &dyn FeatureExtractor,
) -> Result<FinetuneOutcome> {
    config.validate()?;
    let cfg = &bundle.config;
    styles.validate(cfg)?;
    noise.validate(cfg)?;
    let mut weights = bundle.ema_generator.clone();
    weights.set_trainable(true);
    let x = Image::to_tensor(std::slice::from_ref(target))?.detach();
    let style_t: Vec<Tensor> = StyleSet::batch_tensors(std::slice::from_ref(styles));
    let st = SpatialNoiseSet::batch_tensors(&[noise], false, cfg.num_blocks);
    let dy = SpatialNoiseSet::batch_tensors(&[noise], true, cfg.num_blocks);
    let mut opt = Adam::new(config.finetune_lr as f32, 0.9, 0.999);
    let mut best = (f64::INFINITY, 0usize, weights.frozen());
    let mut initial = None;
    let mut trace = Vec::with_capacity(config.finetune_iters + 1);
    let mut diverged = false;
    for iter in 0..=config.finetune_iters {
        let view = bundle.with_synthesis(&weights);
        let y = view.synthesize_tensors(&style_t, &st, &dy)?;
        let mae = y.sub(&x).abs().mean_all();
        let pl = perceptual_tensor(extractor, &y, &x)?;
        let loss = mae.add(&pl.mul_scalar(config.finetune_perceptual_weight as f32));
        let value = loss.item() as f64;
        let first = *initial.get_or_insert(value);
        trace.push(FinetuneRecord {
            iter,
            loss: value,
            mae: mae.item() as f64,
        });
        if !value.is_finite() || value > 10.0 * first {
            log::warn!("finetuning diverged at iteration {iter}; keeping iterate {}", best.1);
            diverged = true;
            break;
        }
        if value < best.0 {
            best = (value, iter, weights.frozen());
        }
        if iter == config.finetune_iters {
            break;
        }
        let grads = loss.backward();
        opt.step(&mut weights, &grads);
    }
    Ok(FinetuneOutcome {
        synthesis: best.2,
        trace,
        best_iter: best.1,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_halves_after_twenty_flat_iterations() {
        let mut s = PlateauSchedule::new(0.1, 20, Some(100));
        let mut lrs = Vec::new();
        for _ in 0..45 {
            lrs.push(s.lr);
            s.observe(1.0);
        }
        assert!(lrs[..=20].iter().all(|&v| v == 0.1));
        assert_eq!(lrs[21], 0.05);
        assert!(lrs[22..=40].iter().all(|&v| v == 0.05));
        assert_eq!(lrs[41], 0.025);
    }

    #[test]
    fn early_stop_after_hundred_flat_iterations() {
        let mut s = PlateauSchedule::new(0.1, 20, Some(100));
        let mut taken = 0;
        for _ in 0..1000 {
            taken += 1;
            if s.observe(1.0) {
                break;
            }
        }
        assert_eq!(taken, 101);
        let mut no_stop = PlateauSchedule::new(0.1, 20, None);
        assert!((0..1000).all(|_| !no_stop.observe(1.0)));
    }

    #[test]
    fn improvement_resets_counters() {
        let mut s = PlateauSchedule::new(0.1, 3, Some(5));
        s.observe(1.0);
        s.observe(2.0);
        s.observe(2.0);
        s.observe(0.5);
        s.observe(2.0);
        s.observe(2.0);
        assert_eq!(s.lr, 0.1);
        assert_eq!(s.since_improvement, 2);
    }

    #[test]
    fn noise_steps_are_scaled() {
        let mut store = ParamStore::new();
        store.insert("w.0", vec![1.0; 4], &[1, 4]);
        store.insert("s_st.0", vec![1.0; 4], &[1, 1, 2, 2]);
        let mut opt = latent_optimizer(0.1, 0.001);
        let g = vec![0.3, -0.7, 1.1, 2.0];
        opt.step_named(&mut store, vec![("w.0".to_string(), g.clone()), ("s_st.0".to_string(), g)]);
        let dw: Vec<f32> = store.get("w.0").data().iter().map(|v| v - 1.0).collect();
        let ds: Vec<f32> = store.get("s_st.0").data().iter().map(|v| v - 1.0).collect();
        for (a, b) in dw.iter().zip(&ds) {
            assert!((b / a - 0.001).abs() < 1e-3 * 1e-3);
        }
    }

    #[test]
    fn projection_respects_the_mask() {
        let mut noise = SpatialNoiseSet {
            static_maps: vec![NoiseMap { side: 4, data: vec![1.0; 16] }],
            dynamic_maps: vec![NoiseMap { side: 4, data: vec![1.0; 16] }],
        };
        let mask = Mask::horizon_split(8, 8, 0.5);
        project_noise(&mut noise, &mask);
        assert_eq!(&noise.static_maps[0].data[..8], &[0.0; 8]);
        assert_eq!(&noise.static_maps[0].data[8..], &[1.0; 8]);
        assert_eq!(&noise.dynamic_maps[0].data[..8], &[1.0; 8]);
        assert_eq!(&noise.dynamic_maps[0].data[8..], &[0.0; 8]);
    }
}
