use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensor::{Adam, Conv2d, Linear, ParamStore, Tensor};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::model::checkpoint::Archive;
use crate::model::{GeneratorView, LatentCode, ModelBundle, SpatialNoiseSet, StyleSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    /// Synthetic training images drawn from the generator.
    pub samples: usize,
    pub heldout: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    /// Output channels of the stem and of the four residual stages.
    pub stem_channels: usize,
    pub stage_channels: [usize; 4],
    pub hidden: usize,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn paper() -> Self {
        Self {
            samples: 200_000,
            heldout: 1000,
            epochs: 1,
            batch_size: 32,
            learning_rate: 1e-3,
            stem_channels: 64,
            stage_channels: [64, 128, 256, 512],
            hidden: 1024,
            seed: 0,
        }
    }

    pub fn toy() -> Self {
        Self {
            samples: 2000,
            heldout: 200,
            epochs: 6,
            batch_size: 32,
            learning_rate: 1e-3,
            stem_channels: 16,
            stage_channels: [16, 32, 64, 64],
            hidden: 256,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.batch_size == 0 || self.hidden == 0 || self.stem_channels == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        if self.stage_channels.contains(&0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("encoder channels and learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Residual stage: `x' = proj(x) + conv1(lrelu(conv0(x)))`, then lrelu.
#[derive(Clone, Debug)]
struct Stage {
    conv0: Conv2d,
    conv1: Conv2d,
    proj: Option<Conv2d>,
}

impl Stage {
    fn new(name: &str, cin: usize, cout: usize) -> Self {
        Self {
            conv0: Conv2d::new(format!("{name}.conv0"), cin, cout, 3),
            conv1: Conv2d::new(format!("{name}.conv1"), cout, cout, 3).with_gain(0.5),
            proj: (cin != cout).then(|| Conv2d::new(format!("{name}.proj"), cin, cout, 1).with_gain(1.0).without_bias()),
        }
    }

    fn init(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) {
        self.conv0.init(store, rng);
        self.conv1.init(store, rng);
        if let Some(p) = &self.proj {
            p.init(store, rng);
        }
    }

    fn forward(&self, store: &ParamStore, x: &Tensor) -> Tensor {
        let skip = self.proj.as_ref().map_or_else(|| x.clone(), |p| p.forward(store, x));
        let h = self.conv1.forward(store, &self.conv0.forward(store, x).leaky_relu(0.2));
        skip.add(&h).leaky_relu(0.2)
    }
}

/// Residual convolutional encoder predicting one style vector per block from
/// globally pooled features of all four stages.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub resolution: usize,
    pub num_blocks: usize,
    pub style_dim: usize,
    pub params: ParamStore,
    /// Offset added to the predicted styles (the generator's mean style).
    pub style_offset: Vec<f32>,
    stem: Conv2d,
    stages: Vec<Stage>,
    fc0: Linear,
    fc1: Linear,
}

/// Training summary; MAE is in style units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderReport {
    pub epochs: Vec<f64>,
    pub heldout_mae: f64,
    pub mean_style_mae: f64,
    /// True when the generator had not been trained at all.
    pub untrained_generator: bool,
}

impl Encoder {
    pub const KIND: &'static str = "encoder";

    fn build(config: &EncoderConfig, num_blocks: usize, style_dim: usize) -> (Conv2d, Vec<Stage>, Linear, Linear) {
        let stem = Conv2d::new("enc.stem", 3, config.stem_channels, 3);
        let mut cin = config.stem_channels;
        let stages = config
            .stage_channels
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let s = Stage::new(&format!("enc.s{i}"), cin, c);
                cin = c;
                s
            })
            .collect();
        let feat: usize = config.stage_channels.iter().sum();
        let fc0 = Linear::new("enc.fc0", feat, config.hidden);
        let fc1 = Linear::new("enc.fc1", config.hidden, num_blocks * style_dim).with_gain(0.1);
        (stem, stages, fc0, fc1)
    }

    pub fn new(config: &EncoderConfig, resolution: usize, num_blocks: usize, style_dim: usize, style_offset: Vec<f32>) -> Result<Self> {
        config.validate()?;
        if style_offset.len() != style_dim {
            return Err(Error::Dimension(format!("style offset length {} vs {style_dim}", style_offset.len())));
        }
        let (stem, stages, fc0, fc1) = Self::build(config, num_blocks, style_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xE1C0);
        let mut params = ParamStore::new();
        stem.init(&mut params, &mut rng);
        for s in &stages {
            s.init(&mut params, &mut rng);
        }
        fc0.init(&mut params, 0.0, &mut rng);
        fc1.init(&mut params, 0.0, &mut rng);
        Ok(Self {
            config: config.clone(),
            resolution,
            num_blocks,
            style_dim,
            params,
            style_offset,
            stem,
            stages,
            fc0,
            fc1,
        })
    }

    /// `[B, 3, R, R]` to `[B, num_blocks * style_dim]`.
    fn forward(&self, params: &ParamStore, x: &Tensor) -> Tensor {
        let mut h = self.stem.forward(params, x).leaky_relu(0.2);
        let mut pooled = Vec::with_capacity(self.stages.len());
        for (i, s) in self.stages.iter().enumerate() {
            if i > 0 && h.shape()[2] >= 2 {
                h = h.avg_pool2x();
            }
            h = s.forward(params, &h);
            let (b, c, _, _) = h.dims4();
            pooled.push(h.mean_keepdim(&[2, 3]).reshape(&[b, c]));
        }
        let f = Tensor::concat(&pooled, 1);
        let out = self.fc1.forward(params, &self.fc0.forward(params, &f).relu());
        let offset: Vec<f32> = (0..self.num_blocks).flat_map(|_| self.style_offset.iter().copied()).collect();
        out.add(&Tensor::new(offset, &[1, self.num_blocks * self.style_dim]))
    }

    fn input_tensor(&self, images: &[Image]) -> Result<Tensor> {
        let resized: Vec<Image> = images
            .iter()
            .map(|i| {
                if i.width == self.resolution && i.height == self.resolution {
                    i.clone()
                } else {
                    i.resize(self.resolution, self.resolution)
                }
            })
            .collect();
        Ok(Image::to_tensor(&resized)?.detach())
    }

    fn split(&self, flat: &[f32], b: usize) -> Vec<StyleSet> {
        let per = self.num_blocks * self.style_dim;
        (0..b)
            .map(|i| StyleSet {
                styles: flat[i * per..(i + 1) * per].chunks(self.style_dim).map(|c| c.to_vec()).collect(),
            })
            .collect()
    }

    /// Predicted extended styles for each image.
    pub fn predict(&self, images: &[Image]) -> Result<Vec<StyleSet>> {
        let frozen = self.params.frozen();
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(32) {
            let y = self.forward(&frozen, &self.input_tensor(chunk)?);
            out.extend(self.split(y.data(), chunk.len()));
        }
        Ok(out)
    }

    pub fn to_archive(&self) -> Result<Archive> {
        Ok(Archive::new(
            Self::KIND,
            serde_json::json!({
                "config": self.config,
                "resolution": self.resolution,
                "num_blocks": self.num_blocks,
                "style_dim": self.style_dim,
                "style_offset": self.style_offset,
            }),
        )
        .with_group("params", &self.params))
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        archive.expect_kind(Self::KIND)?;
        let m = &archive.meta;
        let config: EncoderConfig = serde_json::from_value(m["config"].clone())?;
        let get = |k: &str| -> Result<usize> {
            m[k].as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Format(format!("encoder archive lacks `{k}`")))
        };
        let offset: Vec<f32> = serde_json::from_value(m["style_offset"].clone())?;
        let mut enc = Self::new(&config, get("resolution")?, get("num_blocks")?, get("style_dim")?, offset)?;
        let params = archive.group("params")?;
        if !enc.params.same_layout(params) {
            return Err(Error::Format("encoder weights do not match their configuration".into()));
        }
        enc.params = params.clone();
        enc.params.set_trainable(true);
        Ok(enc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_archive()?.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_archive(&Archive::load(path)?)
    }
}

/// Generated images and the uniform styles that produced them.
pub fn synthetic_style_pairs(view: &GeneratorView<'_>, count: usize, seed: u64) -> Result<(Vec<Image>, Vec<Vec<f32>>)> {
    let cfg = view.config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(count);
    let mut styles = Vec::with_capacity(count);
    while images.len() < count {
        let b = (count - images.len()).min(32);
        let codes: Vec<LatentCode> = (0..b).map(|_| LatentCode::sample(&mut rng, cfg)).collect();
        let noise: Vec<SpatialNoiseSet> = (0..b).map(|_| SpatialNoiseSet::sample(&mut rng, cfg)).collect();
        let ws = view.map_batch(&codes)?;
        let sets: Vec<StyleSet> = ws.iter().map(|w| StyleSet::uniform(w, cfg.num_blocks)).collect();
        let refs: Vec<&SpatialNoiseSet> = noise.iter().collect();
        let t = view.synthesize_batch(&sets, &refs)?;
        images.extend(Image::batch_from_tensor(&t).into_iter().map(|i| i.clamped()));
        styles.extend(ws);
    }
    Ok((images, styles))
}

fn mae_against(pred: &[StyleSet], truth: &[Vec<f32>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        for s in &p.styles {
            for (a, b) in s.iter().zip(t) {
                sum += (a - b).abs() as f64;
                n += 1;
            }
        }
    }
    sum / n.max(1) as f64
}

/// Trains an encoder on images sampled from the bundle's averaged generator,
/// with mean absolute error against the true styles.
pub fn train_encoder(bundle: &ModelBundle, config: &EncoderConfig) -> Result<(Encoder, EncoderReport)> {
    config.validate()?;
    let view = bundle.ema();
    let cfg = view.config();
    let untrained = bundle.progress.steps == 0;
    if untrained {
        log::warn!("training an encoder on an untrained generator");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mean = view.mean_style(10_000, &mut rng)?;
    let mut enc = Encoder::new(config, cfg.final_resolution(), cfg.num_blocks, cfg.style_dim, mean.clone())?;
    let (images, styles) = synthetic_style_pairs(&view, config.samples, config.seed.wrapping_add(1))?;
    let mut opt = Adam::new(config.learning_rate, 0.9, 0.999);
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Image> = chunk.iter().map(|&i| images[i].clone()).collect();
            let target: Vec<f32> = chunk
                .iter()
                .flat_map(|&i| (0..cfg.num_blocks).flat_map(|_| styles[i].iter().copied()).collect::<Vec<_>>())
                .collect();
            let x = enc.input_tensor(&batch)?;
            let y = enc.forward(&enc.params, &x);
            let t = Tensor::new(target, y.shape());
            let loss = y.sub(&t).abs().mean_all();
            if !loss.all_finite() {
                return Err(Error::Numeric(format!("encoder loss diverged in epoch {epoch}")));
            }
            total += loss.item() as f64;
            batches += 1;
            let grads = loss.backward();
            opt.step(&mut enc.params, &grads);
        }
        let avg = total / batches.max(1) as f64;
        log::info!("encoder epoch {epoch}: mae {avg:.4}");
        epochs.push(avg);
    }
    let (held_images, held_styles) = synthetic_style_pairs(&view, config.heldout.max(1), config.seed.wrapping_add(2))?;
    let pred = enc.predict(&held_images)?;
    let baseline: Vec<StyleSet> = held_styles.iter().map(|_| StyleSet::uniform(&mean, cfg.num_blocks)).collect();
    let report = EncoderReport {
        epochs,
        heldout_mae: mae_against(&pred, &held_styles),
        mean_style_mae: mae_against(&baseline, &held_styles),
        untrained_generator: untrained,
    };
    Ok((enc, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeneratorConfig;

    fn tiny() -> ModelBundle {
        let cfg = GeneratorConfig {
            channel_widths: vec![8, 8],
            mapping_depth: 2,
            ..GeneratorConfig::with_width_factor(2, 1.0)
        };
        ModelBundle::new(&cfg, 1).unwrap()
    }

    fn small_config() -> EncoderConfig {
        EncoderConfig {
            samples: 16,
            heldout: 4,
            epochs: 1,
            batch_size: 8,
            stem_channels: 4,
            stage_channels: [4, 4, 8, 8],
            hidden: 16,
            ..EncoderConfig::toy()
        }
    }

    #[test]
    fn prediction_shape_and_untrained_flag() {
        let b = tiny();
        let (enc, report) = train_encoder(&b, &small_config()).unwrap();
        assert!(report.untrained_generator);
        let p = enc.predict(&[Image::new(8, 8), Image::new(20, 20)]).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|s| s.styles.len() == 2 && s.styles.iter().all(|v| v.len() == 512)));
    }

    #[test]
    fn archive_round_trip() {
        let b = tiny();
        let (enc, _) = train_encoder(&b, &small_config()).unwrap();
        let back = Encoder::from_archive(&Archive::from_bytes(&enc.to_archive().unwrap().to_bytes().unwrap()).unwrap()).unwrap();
        let img = [Image::filled(8, 8, [0.2, -0.1, 0.5])];
        assert_eq!(enc.predict(&img).unwrap(), back.predict(&img).unwrap());
    }
}
