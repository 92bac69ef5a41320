//! Architectures. Weights live in [`ParamStore`]s owned by the caller, so one
//! architecture value serves live, averaged and fine-tuned weight sets alike.

use rand::Rng;
use tensor::{Conv2d, Linear, ParamStore, Tensor};

use super::config::GeneratorConfig;
use crate::error::{Error, Result};

const LRELU: f32 = 0.2;
const NORM_EPS: f32 = 1e-8;

/// Pixel-normalized fully connected stack, `z -> w`.
#[derive(Clone, Debug)]
pub struct MappingNetwork {
    layers: Vec<Linear>,
    latent_dim: usize,
}

impl MappingNetwork {
    pub fn new(config: &GeneratorConfig) -> Self {
        let layers = (0..config.mapping_depth)
            .map(|i| {
                let input = if i == 0 { config.latent_dim } else { config.style_dim };
                Linear::new(format!("map.fc{i}"), input, config.style_dim).with_lr_mul(config.mapping_lr_mul)
            })
            .collect();
        Self {
            layers,
            latent_dim: config.latent_dim,
        }
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        for l in &self.layers {
            l.init(store, 0.0, rng);
        }
    }

    /// `z` is `[B, latent_dim]`.
    pub fn forward(&self, store: &ParamStore, z: &Tensor) -> Result<Tensor> {
        if z.rank() != 2 || z.shape()[1] != self.latent_dim {
            return Err(Error::Dimension(format!(
                "mapping input {:?}, expected [B, {}]",
                z.shape(),
                self.latent_dim
            )));
        }
        let norm = z.square().mean_keepdim(&[1]).add_scalar(NORM_EPS).sqrt();
        let mut x = z.div(&norm);
        for l in &self.layers {
            x = l.forward(store, &x).leaky_relu(LRELU);
        }
        Ok(x)
    }
}

struct StyledLayer {
    conv: Conv2d,
    noise_static: String,
    noise_dynamic: String,
    style_scale: Linear,
    style_shift: Linear,
}

impl StyledLayer {
    fn new(block: usize, j: usize, in_ch: usize, out_ch: usize, style_dim: usize) -> Self {
        let p = format!("syn.b{block}.l{j}");
        Self {
            conv: Conv2d::new(format!("{p}.conv"), in_ch, out_ch, 3),
            noise_static: format!("{p}.noise_st"),
            noise_dynamic: format!("{p}.noise_dyn"),
            style_scale: Linear::new(format!("{p}.style_scale"), style_dim, out_ch).with_gain(1.0),
            style_shift: Linear::new(format!("{p}.style_shift"), style_dim, out_ch).with_gain(1.0),
        }
    }

    fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        let c = self.conv.out_ch;
        self.conv.init(store, rng);
        store.insert_const(&self.noise_static, &[1, c, 1, 1], 0.0);
        store.insert_const(&self.noise_dynamic, &[1, c, 1, 1], 0.0);
        self.style_scale.init(store, 1.0, rng);
        self.style_shift.init(store, 0.0, rng);
    }

    fn forward(&self, store: &ParamStore, x: &Tensor, w: &Tensor, s_st: &Tensor, s_dyn: &Tensor) -> Tensor {
        let c = self.conv.out_ch;
        let b = w.shape()[0];
        let x = self
            .conv
            .forward(store, x)
            .add(&s_st.mul(store.get(&self.noise_static)))
            .add(&s_dyn.mul(store.get(&self.noise_dynamic)))
            .leaky_relu(LRELU)
            .instance_norm(NORM_EPS);
        let scale = self.style_scale.forward(store, w).reshape(&[b, c, 1, 1]);
        let shift = self.style_shift.forward(store, w).reshape(&[b, c, 1, 1]);
        x.mul(&scale).add(&shift)
    }
}

/// Synthesis network: a learned 4x4 constant followed by `N` styled blocks.
pub struct Synthesis {
    widths: Vec<usize>,
    layers: Vec<[StyledLayer; 2]>,
    to_rgb: Vec<Conv2d>,
}

impl Synthesis {
    pub fn new(config: &GeneratorConfig) -> Self {
        let w = &config.channel_widths;
        let layers = (1..=config.num_blocks)
            .map(|n| {
                let c = w[n - 1];
                let prev = if n == 1 { c } else { w[n - 2] };
                [
                    StyledLayer::new(n, 0, prev, c, config.style_dim),
                    StyledLayer::new(n, 1, c, c, config.style_dim),
                ]
            })
            .collect();
        let to_rgb = (1..=config.num_blocks)
            .map(|n| Conv2d::new(format!("syn.rgb{n}"), w[n - 1], 3, 1).with_gain(1.0))
            .collect();
        Self {
            widths: w.clone(),
            layers,
            to_rgb,
        }
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        store.insert_normal("syn.const", &[1, self.widths[0], 4, 4], 1.0, rng);
        for pair in &self.layers {
            pair[0].init(store, rng);
            pair[1].init(store, rng);
        }
        for rgb in &self.to_rgb {
            rgb.init(store, rng);
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.widths.len()
    }

    /// Image batch at block `active` (1-based). `styles[n]` is `[B, style_dim]`;
    /// noise tensors are `[B, 1, s, s]` and must cover the active blocks. With
    /// `alpha < 1` the output fades in from the previous block's upsampled RGB.
    pub fn forward(
        &self,
        store: &ParamStore,
        styles: &[Tensor],
        noise_static: &[Tensor],
        noise_dynamic: &[Tensor],
        active: usize,
        alpha: f32,
    ) -> Result<Tensor> {
        if active == 0 || active > self.num_blocks() {
            return Err(Error::Argument(format!("active block {active} of {}", self.num_blocks())));
        }
        if styles.len() < active || noise_static.len() < active || noise_dynamic.len() < active {
            return Err(Error::Shape("styles or noise do not cover the active blocks".into()));
        }
        let batch = styles[0].shape()[0];
        for n in 0..active {
            let side = 4 << n;
            for t in [&noise_static[n], &noise_dynamic[n]] {
                if t.shape() != [batch, 1, side, side] {
                    return Err(Error::Shape(format!(
                        "noise for block {} is {:?}, expected [{batch}, 1, {side}, {side}]",
                        n + 1,
                        t.shape()
                    )));
                }
            }
            if styles[n].shape()[0] != batch {
                return Err(Error::Shape("style batch sizes differ".into()));
            }
        }
        let mut x = store.get("syn.const").clone();
        let mut prev = None;
        for n in 0..active {
            if n > 0 {
                x = x.upsample2x();
            }
            let [l0, l1] = &self.layers[n];
            x = l0.forward(store, &x, &styles[n], &noise_static[n], &noise_dynamic[n]);
            x = l1.forward(store, &x, &styles[n], &noise_static[n], &noise_dynamic[n]);
            if n + 2 == active && alpha < 1.0 {
                prev = Some(x.clone());
            }
        }
        let rgb = self.to_rgb[active - 1].forward(store, &x);
        Ok(match prev {
            Some(p) => {
                let low = self.to_rgb[active - 2].forward(store, &p).upsample2x();
                low.add(&rgb.sub(&low).mul_scalar(alpha))
            }
            None => rgb,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DiscriminatorKind {
    /// Judges single images.
    Static,
    /// Judges frame pairs; the first 1x1 layer runs on each frame with half
    /// the channels and the two feature maps are concatenated.
    Pairwise,
}

/// Convolutional critic mirroring the synthesis blocks in reverse.
pub struct Discriminator {
    kind: DiscriminatorKind,
    widths: Vec<usize>,
    from_rgb: Vec<Conv2d>,
    blocks: Vec<[Conv2d; 2]>,
    final_conv: Conv2d,
    fc0: Linear,
    fc1: Linear,
}

impl Discriminator {
    pub fn new(kind: DiscriminatorKind, config: &GeneratorConfig) -> Result<Self> {
        let p = match kind {
            DiscriminatorKind::Static => "dst",
            DiscriminatorKind::Pairwise => "ddyn",
        };
        let w = config.channel_widths.clone();
        if kind == DiscriminatorKind::Pairwise && w.iter().any(|c| c % 2 != 0) {
            return Err(Error::Config("pairwise discriminator needs even channel widths".into()));
        }
        let from_rgb = (1..=w.len())
            .map(|n| {
                let out = match kind {
                    DiscriminatorKind::Static => w[n - 1],
                    DiscriminatorKind::Pairwise => w[n - 1] / 2,
                };
                Conv2d::new(format!("{p}.rgb{n}"), 3, out, 1)
            })
            .collect();
        let blocks = (2..=w.len())
            .map(|n| {
                [
                    Conv2d::new(format!("{p}.b{n}.conv0"), w[n - 1], w[n - 1], 3),
                    Conv2d::new(format!("{p}.b{n}.conv1"), w[n - 1], w[n - 2], 3),
                ]
            })
            .collect();
        let c1 = w[0];
        Ok(Self {
            kind,
            from_rgb,
            blocks,
            final_conv: Conv2d::new(format!("{p}.b1.conv"), c1, c1, 3),
            fc0: Linear::new(format!("{p}.fc0"), c1 * 16, c1),
            fc1: Linear::new(format!("{p}.fc1"), c1, 1).with_gain(1.0),
            widths: w,
        })
    }

    pub fn kind(&self) -> DiscriminatorKind {
        self.kind
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        for c in &self.from_rgb {
            c.init(store, rng);
        }
        for [a, b] in &self.blocks {
            a.init(store, rng);
            b.init(store, rng);
        }
        self.final_conv.init(store, rng);
        self.fc0.init(store, 0.0, rng);
        self.fc1.init(store, 0.0, rng);
    }

    fn from_rgb(&self, store: &ParamStore, block: usize, frames: &[Tensor]) -> Tensor {
        let conv = &self.from_rgb[block - 1];
        match self.kind {
            DiscriminatorKind::Static => conv.forward(store, &frames[0]).leaky_relu(LRELU),
            DiscriminatorKind::Pairwise => {
                let a = conv.forward(store, &frames[0]);
                let b = conv.forward(store, &frames[1]);
                Tensor::concat(&[a, b], 1).leaky_relu(LRELU)
            }
        }
    }

    /// Logits `[B, 1]`. A static critic takes one `[B, 3, r, r]` tensor, a
    /// pairwise critic takes two. `r` must equal the side of block `active`.
    pub fn forward(&self, store: &ParamStore, frames: &[Tensor], active: usize, alpha: f32) -> Result<Tensor> {
        let expected = match self.kind {
            DiscriminatorKind::Static => 1,
            DiscriminatorKind::Pairwise => 2,
        };
        if frames.len() != expected {
            return Err(Error::Argument(format!("{:?} critic takes {expected} inputs", self.kind)));
        }
        if active == 0 || active > self.widths.len() {
            return Err(Error::Argument(format!("active block {active} of {}", self.widths.len())));
        }
        let side = 4 << (active - 1);
        for f in frames {
            if f.rank() != 4 || f.shape()[1] != 3 || f.shape()[2] != side || f.shape()[3] != side {
                return Err(Error::Shape(format!(
                    "critic input {:?} at training resolution {side}",
                    f.shape()
                )));
            }
            if f.shape()[0] != frames[0].shape()[0] {
                return Err(Error::Shape("pair frames differ in batch size".into()));
            }
        }
        let mut h = self.from_rgb(store, active, frames);
        for n in (2..=active).rev() {
            let [c0, c1] = &self.blocks[n - 2];
            h = c0.forward(store, &h).leaky_relu(LRELU);
            h = c1.forward(store, &h).leaky_relu(LRELU).avg_pool2x();
            if n == active && alpha < 1.0 {
                let pooled: Vec<Tensor> = frames.iter().map(|f| f.avg_pool2x()).collect();
                let skip = self.from_rgb(store, n - 1, &pooled);
                h = skip.add(&h.sub(&skip).mul_scalar(alpha));
            }
        }
        let b = h.shape()[0];
        h = self.final_conv.forward(store, &h).leaky_relu(LRELU);
        h = h.reshape(&[b, self.widths[0] * 16]);
        h = self.fc0.forward(store, &h).leaky_relu(LRELU);
        Ok(self.fc1.forward(store, &h))
    }
}
