//! RGB images in `[-1, 1]`, binary masks, resampling and file I/O.

use std::path::Path;

use tensor::Tensor;

use crate::error::{Error, Result};

/// Row-major RGB image, interleaved channels, values nominally in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * 3 + c] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamped(&self) -> Image {
        self.map(|v| v.clamp(-1.0, 1.0))
    }

    /// Single channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(3).map(|&v| v as f64).collect()
    }

    pub fn from_channels(width: usize, height: usize, planes: &[Vec<f64>; 3]) -> Image {
        Image::from_fn(width, height, |x, y| {
            let i = y * width + x;
            [planes[0][i] as f32, planes[1][i] as f32, planes[2][i] as f32]
        })
    }

    /// Mean absolute difference over all samples.
    pub fn mae(&self, other: &Image) -> Result<f64> {
        check_same(self, other)?;
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a as f64 - *b as f64).abs())
            .sum();
        Ok(s / self.data.len() as f64)
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Argument(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        Ok(Image::from_fn(w, h, |x, y| self.pixel(x0 + x, y0 + y)))
    }

    pub fn center_crop_square(&self) -> Image {
        let s = self.width.min(self.height);
        let x0 = (self.width - s) / 2;
        let y0 = (self.height - s) / 2;
        self.crop(x0, y0, s, s).expect("square crop fits")
    }

    /// Separable triangle-filter resampling. Downscaling widens the filter
    /// support so every source pixel contributes; same-size calls return a copy.
    pub fn resize(&self, width: usize, height: usize) -> Image {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let wx = resample_weights(self.width, width);
        let wy = resample_weights(self.height, height);
        let mut tmp = vec![0f64; self.height * width * 3];
        for y in 0..self.height {
            for (ox, taps) in wx.iter().enumerate() {
                for c in 0..3 {
                    let mut acc = 0.0;
                    for &(ix, w) in taps {
                        acc += w * self.get(ix, y, c) as f64;
                    }
                    tmp[(y * width + ox) * 3 + c] = acc;
                }
            }
        }
        let mut out = Image::new(width, height);
        for (oy, taps) in wy.iter().enumerate() {
            for x in 0..width {
                for c in 0..3 {
                    let mut acc = 0.0;
                    for &(iy, w) in taps {
                        acc += w * tmp[(iy * width + x) * 3 + c];
                    }
                    out.set(x, oy, c, acc as f32);
                }
            }
        }
        out
    }

    /// Batch of equally sized images as an `[N, 3, H, W]` tensor.
    pub fn to_tensor(images: &[Image]) -> Result<Tensor> {
        let first = images
            .first()
            .ok_or_else(|| Error::Argument("empty image batch".into()))?;
        let (w, h) = (first.width, first.height);
        let mut data = Vec::with_capacity(images.len() * 3 * w * h);
        for img in images {
            if img.width != w || img.height != h {
                return Err(Error::Shape("images in a batch differ in size".into()));
            }
            for c in 0..3 {
                data.extend(img.data.iter().skip(c).step_by(3));
            }
        }
        Ok(Tensor::new(data, &[images.len(), 3, h, w]))
    }

    /// Element `index` of an `[N, 3, H, W]` tensor.
    pub fn from_tensor(t: &Tensor, index: usize) -> Image {
        let (n, c, h, w) = t.dims4();
        assert!(c == 3 && index < n, "expected [N,3,H,W] tensor");
        let plane = h * w;
        let base = index * 3 * plane;
        let d = t.data();
        Image::from_fn(w, h, |x, y| {
            let i = base + y * w + x;
            [d[i], d[i + plane], d[i + 2 * plane]]
        })
    }

    pub fn batch_from_tensor(t: &Tensor) -> Vec<Image> {
        (0..t.shape()[0]).map(|i| Image::from_tensor(t, i)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let rgb = image::open(path.as_ref())?.to_rgb8();
        let (w, h) = rgb.dimensions();
        let data = rgb.as_raw().iter().map(|&v| v as f32 / 127.5 - 1.0).collect();
        Ok(Image {
            width: w as usize,
            height: h as usize,
            data,
        })
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8)
            .collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes).expect("buffer size")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_rgb8().save(path.as_ref())?;
        Ok(())
    }
}

pub(crate) fn check_same(a: &Image, b: &Image) -> Result<()> {
    if a.same_size(b) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

fn resample_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    let support = scale.max(1.0);
    (0..dst)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale;
            let lo = ((center - support).floor().max(0.0)) as usize;
            let hi = ((center + support).ceil() as usize).min(src);
            let mut taps: Vec<(usize, f64)> = (lo..hi)
                .filter_map(|i| {
                    let d = ((i as f64 + 0.5) - center).abs() / support;
                    (d < 1.0).then_some((i, 1.0 - d))
                })
                .collect();
            if taps.is_empty() {
                taps.push(((center.floor() as usize).min(src - 1), 1.0));
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= total);
            taps
        })
        .collect()
}

/// Binary segmentation: `0` marks dynamic pixels (sky, water), `1` static ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Mask {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value.min(1); width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Self { width, height, data }
    }

    /// Rows whose centers lie at or below `horizon_y` (normalized) are static.
    pub fn horizon_split(width: usize, height: usize, horizon_y: f64) -> Self {
        Self::from_fn(width, height, |_, y| (y as f64 + 0.5) / height as f64 >= horizon_y)
    }

    #[inline]
    pub fn is_static(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn count_static(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn count_dynamic(&self) -> usize {
        self.data.len() - self.count_static()
    }

    pub fn inverted(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| (v == 0) as u8).collect(),
        }
    }

    pub fn resize_nearest(&self, width: usize, height: usize) -> Mask {
        if width == self.width && height == self.height {
            return self.clone();
        }
        Mask::from_fn(width, height, |x, y| {
            let sx = ((x as f64 + 0.5) * self.width as f64 / width as f64) as usize;
            let sy = ((y as f64 + 0.5) * self.height as f64 / height as f64) as usize;
            self.is_static(sx.min(self.width - 1), sy.min(self.height - 1))
        })
    }

    /// `[1, 1, H, W]` tensor of zeros and ones.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            self.data.iter().map(|&v| v as f32).collect(),
            &[1, 1, self.height, self.width],
        )
    }

    /// Mean row of the sky/ground boundary, normalized to `[0, 1]`.
    pub fn horizon_y(&self) -> f64 {
        let mut total = 0.0;
        for x in 0..self.width {
            let first_static = (0..self.height)
                .find(|&y| self.is_static(x, y))
                .unwrap_or(self.height);
            total += first_static as f64;
        }
        total / (self.width * self.height) as f64
    }

    /// White (luminance above one half) means static.
    pub fn load(path: impl AsRef<Path>) -> Result<Mask> {
        let gray = image::open(path.as_ref())?.to_luma8();
        let (w, h) = gray.dimensions();
        Ok(Mask {
            width: w as usize,
            height: h as usize,
            data: gray.as_raw().iter().map(|&v| (v > 127) as u8).collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.data.iter().map(|&v| v * 255).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer size")
            .save(path.as_ref())?;
        Ok(())
    }
}
