use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensor::{Conv2d, ParamStore, Tensor};

use crate::error::{Error, Result};
use crate::imaging::{Image, Mask};
use crate::model::checkpoint::Archive;

/// Fixed convolutional feature pyramid used by perceptual distances and FID.
pub trait FeatureExtractor: Send + Sync {
    fn name(&self) -> &str;

    /// Differentiable activations of an `[N, 3, H, W]` batch, finest level first.
    fn levels(&self, x: &Tensor) -> Result<Vec<Tensor>>;

    /// One vector per image: channel means of every level, concatenated.
    fn embed(&self, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        let levels = self.levels(&Image::to_tensor(images)?.detach())?;
        let mut out = vec![Vec::new(); images.len()];
        for l in &levels {
            let pooled = l.mean_keepdim(&[2, 3]);
            let (n, c, _, _) = pooled.dims4();
            let d = pooled.data();
            for (i, row) in out.iter_mut().enumerate().take(n) {
                row.extend(d[i * c..(i + 1) * c].iter().map(|&v| v as f64));
            }
        }
        Ok(out)
    }
}

/// Plain conv, leaky-ReLU, 2x average-pool stack with stored weights.
pub struct ConvPyramid {
    name: String,
    layers: Vec<Conv2d>,
    params: ParamStore,
}

impl ConvPyramid {
    pub const KIND: &'static str = "feature_extractor";

    /// Seeded random weights; deterministic for a given seed.
    pub fn random(seed: u64, channels: &[usize]) -> Result<Self> {
        if channels.len() < 2 {
            return Err(Error::Config("feature pyramid needs input and at least one level".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = Self::layers(channels);
        let mut params = ParamStore::new();
        params.set_trainable(false);
        for l in &layers {
            l.init(&mut params, &mut rng);
        }
        Ok(Self {
            name: format!("random-pyramid-{seed}"),
            layers,
            params,
        })
    }

    fn layers(channels: &[usize]) -> Vec<Conv2d> {
        channels
            .windows(2)
            .enumerate()
            .map(|(i, w)| Conv2d::new(format!("feat.l{i}"), w[0], w[1], 3).without_bias())
            .collect()
    }

    pub fn to_archive(&self) -> Archive {
        let mut channels = vec![self.layers[0].in_ch];
        channels.extend(self.layers.iter().map(|l| l.out_ch));
        Archive::new(Self::KIND, serde_json::json!({ "name": self.name, "channels": channels }))
            .with_group("params", &self.params)
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        archive.expect_kind(Self::KIND)?;
        let channels: Vec<usize> = serde_json::from_value(archive.meta["channels"].clone())?;
        let name = archive.meta["name"].as_str().unwrap_or("pyramid").to_string();
        let layers = Self::layers(&channels);
        let params = archive.group("params")?.frozen();
        let mut reference = ConvPyramid::random(0, &channels)?.params;
        reference.set_trainable(false);
        if !reference.same_layout(&params) {
            return Err(Error::Format("feature extractor weights do not match their channel list".into()));
        }
        Ok(Self { name, layers, params })
    }
}

impl FeatureExtractor for ConvPyramid {
    fn name(&self) -> &str {
        &self.name
    }

    fn levels(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let (_, c, _, _) = x.dims4();
        if c != self.layers[0].in_ch {
            return Err(Error::Shape(format!("extractor expects {} channels, got {c}", self.layers[0].in_ch)));
        }
        let mut h = x.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                let (_, _, hh, ww) = h.dims4();
                if hh >= 2 && ww >= 2 {
                    h = h.avg_pool2x();
                }
            }
            h = l.forward(&self.params, &h).leaky_relu(0.2);
            out.push(h.clone());
        }
        Ok(out)
    }
}

/// Which feature extractor to use.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExtractorSpec {
    /// Offline default: seeded random pyramid, valid for self-consistency checks.
    RandomPyramid { seed: u64 },
    /// Stored weights, e.g. converted from a pretrained classifier.
    Weights { path: PathBuf },
}

impl Default for ExtractorSpec {
    fn default() -> Self {
        ExtractorSpec::RandomPyramid { seed: 7 }
    }
}

pub const DEFAULT_PYRAMID: [usize; 4] = [3, 16, 32, 32];

impl ExtractorSpec {
    pub fn build(&self) -> Result<Arc<dyn FeatureExtractor>> {
        match self {
            ExtractorSpec::RandomPyramid { seed } => Ok(Arc::new(ConvPyramid::random(*seed, &DEFAULT_PYRAMID)?)),
            ExtractorSpec::Weights { path } => load_weights(path),
        }
    }
}

fn load_weights(path: &Path) -> Result<Arc<dyn FeatureExtractor>> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "feature extractor weights not found at {}",
            path.display()
        )));
    }
    Ok(Arc::new(ConvPyramid::from_archive(&Archive::load(path)?)?))
}

fn unit_channels(t: &Tensor) -> Tensor {
    t.div(&t.square().sum_keepdim(&[1]).add_scalar(1e-10).sqrt())
}

/// Differentiable perceptual distance between two equally shaped batches:
/// per level, channel-normalized activations are compared by squared
/// difference summed over channels and averaged over positions; levels are
/// averaged. Returns a scalar tensor.
pub fn perceptual_tensor(extractor: &dyn FeatureExtractor, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let n = a.shape()[0];
    let both = extractor.levels(&Tensor::concat(&[a.clone(), b.clone()], 0))?;
    let count = both.len() as f32;
    let mut total: Option<Tensor> = None;
    for l in &both {
        let fa = unit_channels(&l.narrow(0, 0, n));
        let fb = unit_channels(&l.narrow(0, n, n));
        let d = fa.sub(&fb).square().sum_keepdim(&[1]).mean_all();
        total = Some(match total {
            None => d,
            Some(t) => t.add(&d),
        });
    }
    Ok(total.expect("extractor has at least one level").mul_scalar(1.0 / count))
}

pub fn perceptual_distance(extractor: &dyn FeatureExtractor, a: &Image, b: &Image) -> Result<f64> {
    crate::imaging::check_same(a, b)?;
    let ta = Image::to_tensor(std::slice::from_ref(a))?.detach();
    let tb = Image::to_tensor(std::slice::from_ref(b))?.detach();
    Ok(perceptual_tensor(extractor, &ta, &tb)?.item() as f64)
}

/// Perceptual distance with everything outside `mask` (true = keep) zeroed in both inputs.
pub fn masked_perceptual_distance(
    extractor: &dyn FeatureExtractor,
    a: &Image,
    b: &Image,
    mask: &Mask,
    keep_static: bool,
) -> Result<f64> {
    crate::imaging::check_same(a, b)?;
    if mask.width != a.width || mask.height != a.height {
        return Err(Error::Shape("mask size differs from image size".into()));
    }
    let apply = |img: &Image| {
        let mut out = img.clone();
        for y in 0..img.height {
            for x in 0..img.width {
                if mask.is_static(x, y) != keep_static {
                    for c in 0..3 {
                        out.set(x, y, c, 0.0);
                    }
                }
            }
        }
        out
    };
    perceptual_distance(extractor, &apply(a), &apply(b))
}
