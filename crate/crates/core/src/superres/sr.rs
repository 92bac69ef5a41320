use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensor::{Adam, Conv2d, ParamStore, Tensor};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::inversion::{invert, InversionConfig, InversionContext};
use crate::model::checkpoint::Archive;
use crate::model::ModelBundle;

pub const SCALE: usize = 4;

/// Training pair: a real frame and the generator's reconstruction of its
/// downsampled version.
#[derive(Clone, Debug, PartialEq)]
pub struct SrPair {
    pub hi_res: Image,
    pub low_res: Image,
}

/// Inverts the downsampled frames with a non-finetuning variant and pairs
/// each reconstruction with the frame at four times the model resolution.
/// Frames whose inversion fails are skipped.
pub fn build_sr_dataset(
    bundle: &ModelBundle,
    frames: &[Image],
    config: &InversionConfig,
    ctx: &mut InversionContext,
) -> Result<Vec<SrPair>> {
    if config.variant.spec().finetune {
        return Err(Error::Config(format!(
            "variant {} finetunes the generator; the SR dataset uses latent optimization only",
            config.variant
        )));
    }
    let res = bundle.config.final_resolution();
    let mut pairs = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        let hi_res = frame.center_crop_square().resize(SCALE * res, SCALE * res);
        let small = hi_res.resize(res, res);
        match invert(bundle, &small, None, config, ctx) {
            Ok(r) => pairs.push(SrPair {
                hi_res,
                low_res: r.reconstruction,
            }),
            Err(e) => log::warn!("skipping frame {i}: {e}"),
        }
    }
    Ok(pairs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrConfig {
    pub channels: usize,
    pub steps: usize,
    pub batch_size: usize,
    /// Low-resolution side of the random training crops.
    pub patch: usize,
    pub learning_rate: f32,
    pub seed: u64,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            channels: 16,
            steps: 300,
            batch_size: 4,
            patch: 16,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Small residual network on top of bilinear ×4 upsampling.
#[derive(Clone, Debug)]
pub struct SrNet {
    pub config: SrConfig,
    /// Low-resolution side seen in training.
    pub resolution: usize,
    /// Resize mismatched inputs instead of rejecting them.
    pub resize_mismatched: bool,
    pub params: ParamStore,
    convs: [Conv2d; 5],
}

impl SrNet {
    pub const KIND: &'static str = "sr_net";

    pub fn new(config: &SrConfig, resolution: usize) -> Result<Self> {
        if config.channels == 0 || config.batch_size == 0 || config.patch == 0 || resolution == 0 {
            return Err(Error::Config("SR network sizes must be positive".into()));
        }
        let c = config.channels;
        let convs = [
            Conv2d::new("sr.head", 3, c, 3),
            Conv2d::new("sr.body", c, c, 3),
            Conv2d::new("sr.up0", c, c, 3),
            Conv2d::new("sr.up1", c, c, 3),
            Conv2d::new("sr.tail", c, 3, 3).with_gain(0.1),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e5);
        let mut params = ParamStore::new();
        for conv in &convs {
            conv.init(&mut params, &mut rng);
        }
        Ok(Self {
            config: config.clone(),
            resolution,
            resize_mismatched: false,
            params,
            convs,
        })
    }

    fn forward(&self, params: &ParamStore, low: &Tensor, upsampled: &Tensor) -> Tensor {
        let [head, body, up0, up1, tail] = &self.convs;
        let h = head.forward(params, low).leaky_relu(0.2);
        let h = h.add(&body.forward(params, &h).leaky_relu(0.2));
        let h = up0.forward(params, &h.upsample2x()).leaky_relu(0.2);
        let h = up1.forward(params, &h.upsample2x()).leaky_relu(0.2);
        upsampled.add(&tail.forward(params, &h))
    }

    fn tensors(low: &[Image]) -> Result<(Tensor, Tensor)> {
        let up: Vec<Image> = low.iter().map(|i| i.resize(i.width * SCALE, i.height * SCALE)).collect();
        Ok((Image::to_tensor(low)?, Image::to_tensor(&up)?))
    }

    pub fn super_resolve(&self, frame: &Image) -> Result<Image> {
        let frame = if frame.width != self.resolution || frame.height != self.resolution {
            if !self.resize_mismatched {
                return Err(Error::Shape(format!(
                    "SR network expects {r}x{r} frames, got {}x{}",
                    frame.width,
                    frame.height,
                    r = self.resolution
                )));
            }
            frame.resize(self.resolution, self.resolution)
        } else {
            frame.clone()
        };
        let (low, up) = Self::tensors(std::slice::from_ref(&frame))?;
        let out = self.forward(&self.params.frozen(), &low, &up);
        Ok(Image::from_tensor(&out, 0).clamped())
    }

    pub fn to_archive(&self) -> Archive {
        Archive::new(
            Self::KIND,
            serde_json::json!({ "config": self.config, "resolution": self.resolution }),
        )
        .with_group("params", &self.params)
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        archive.expect_kind(Self::KIND)?;
        let config: SrConfig = serde_json::from_value(archive.meta["config"].clone())?;
        let res = archive.meta["resolution"]
            .as_u64()
            .ok_or_else(|| Error::Format("SR archive lacks `resolution`".into()))? as usize;
        let mut net = Self::new(&config, res)?;
        let params = archive.group("params")?;
        if !net.params.same_layout(params) {
            return Err(Error::Format("SR weights do not match their configuration".into()));
        }
        net.params = params.clone();
        net.params.set_trainable(true);
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_archive(&Archive::load(path)?)
    }
}

/// Mean absolute error per step, from L1 training on random aligned crops.
pub fn train_sr(pairs: &[SrPair], config: &SrConfig) -> Result<(SrNet, Vec<f64>)> {
    let first = pairs.first().ok_or_else(|| Error::Argument("no SR training pairs".into()))?;
    let res = first.low_res.width;
    for p in pairs {
        if p.low_res.width != res || p.low_res.height != res || p.hi_res.width != SCALE * res || p.hi_res.height != SCALE * res {
            return Err(Error::Shape("SR pairs must be square with a 4x size ratio".into()));
        }
    }
    let mut net = SrNet::new(config, res)?;
    let patch = config.patch.min(res);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Adam::new(config.learning_rate, 0.9, 0.999);
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut lows = Vec::with_capacity(config.batch_size);
        let mut highs = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let p = &pairs[rng.random_range(0..pairs.len())];
            let (x, y) = (rng.random_range(0..=res - patch), rng.random_range(0..=res - patch));
            lows.push(p.low_res.crop(x, y, patch, patch)?);
            highs.push(p.hi_res.crop(SCALE * x, SCALE * y, SCALE * patch, SCALE * patch)?);
        }
        let (low, up) = SrNet::tensors(&lows)?;
        let target = Image::to_tensor(&highs)?;
        let loss = net.forward(&net.params, &low, &up).sub(&target).abs().mean_all();
        if !loss.all_finite() {
            return Err(Error::Numeric(format!("SR loss diverged at step {step}")));
        }
        trace.push(loss.item() as f64);
        let grads = loss.backward();
        opt.step(&mut net.params, &grads);
    }
    Ok((net, trace))
}

/// ×4 upsampler; the bilinear stub needs no weights.
#[derive(Clone, Debug, Default)]
pub enum SrBackend {
    #[default]
    Bilinear,
    Net(SrNet),
}

impl SrBackend {
    pub fn super_resolve(&self, frame: &Image) -> Result<Image> {
        match self {
            SrBackend::Bilinear => Ok(frame.resize(frame.width * SCALE, frame.height * SCALE).clamped()),
            SrBackend::Net(net) => net.super_resolve(frame),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, phase: f32) -> Image {
        Image::from_fn(w, w, |x, y| {
            let (x, y) = (x as f32, y as f32);
            [(0.3 * x + phase).sin() * 0.7, (0.2 * y).cos() * 0.5, ((x + y) * 0.1).sin() * 0.4]
        })
    }

    #[test]
    fn bilinear_stub_is_constant_preserving_and_deterministic() {
        let c = Image::filled(8, 8, [0.25, -0.5, 0.75]);
        let out = SrBackend::Bilinear.super_resolve(&c).unwrap();
        assert_eq!((out.width, out.height), (32, 32));
        assert!(out.data.chunks(3).all(|p| (p[0] - 0.25).abs() < 1e-6 && (p[1] + 0.5).abs() < 1e-6 && (p[2] - 0.75).abs() < 1e-6));
        let t = texture(8, 0.0);
        assert_eq!(SrBackend::Bilinear.super_resolve(&t).unwrap(), SrBackend::Bilinear.super_resolve(&t).unwrap());
    }

    #[test]
    fn network_trains_and_checks_size() {
        let pairs: Vec<SrPair> = (0..3)
            .map(|i| {
                let hi = texture(32, i as f32);
                SrPair {
                    low_res: hi.resize(8, 8),
                    hi_res: hi,
                }
            })
            .collect();
        let cfg = SrConfig {
            channels: 4,
            steps: 30,
            patch: 4,
            ..SrConfig::default()
        };
        let (mut net, trace) = train_sr(&pairs, &cfg).unwrap();
        assert!(trace.iter().all(|v| v.is_finite()));
        let out = net.super_resolve(&pairs[0].low_res).unwrap();
        assert_eq!((out.width, out.height), (32, 32));
        assert_eq!(out, net.super_resolve(&pairs[0].low_res).unwrap());
        assert!(net.super_resolve(&texture(16, 0.0)).is_err());
        net.resize_mismatched = true;
        assert_eq!(net.super_resolve(&texture(16, 0.0)).unwrap().width, 32);
        let back = SrNet::from_archive(&Archive::from_bytes(&net.to_archive().to_bytes().unwrap()).unwrap()).unwrap();
        assert_eq!(back.super_resolve(&pairs[1].low_res).unwrap(), net.super_resolve(&pairs[1].low_res).unwrap());
    }
}
