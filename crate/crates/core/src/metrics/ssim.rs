use crate::error::{Error, Result};
use crate::imaging::{check_same, Image, Mask};

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
/// Pixel values span [-1, 1].
const RANGE: f64 = 2.0;
const C1: f64 = (0.01 * RANGE) * (0.01 * RANGE);
const C2: f64 = (0.03 * RANGE) * (0.03 * RANGE);

fn gaussian(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of a `w x h` plane.
fn filter(plane: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|i| plane[y * w + x + i] * k[i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| tmp[(y + i) * ow + x] * k[i]).sum();
        }
    }
    (out, ow, oh)
}

/// Window side for an image: 11, or the largest odd size that fits.
fn window_for(w: usize, h: usize) -> Result<(usize, f64)> {
    let m = w.min(h);
    if m == 0 {
        return Err(Error::Shape("empty image".into()));
    }
    if m >= WINDOW {
        return Ok((WINDOW, SIGMA));
    }
    let s = if m % 2 == 1 { m } else { m - 1 };
    Ok((s, SIGMA * s as f64 / WINDOW as f64))
}

/// Mean SSIM over channels and windows. With a mask, each window's
/// statistics use only masked pixels (true = kept) and only windows
/// centred on a masked pixel are averaged, so pixels outside the mask never
/// influence the value.
pub fn ssim_masked(a: &Image, b: &Image, mask: Option<(&Mask, bool)>) -> Result<f64> {
    check_same(a, b)?;
    let (w, h) = (a.width, a.height);
    if let Some((m, _)) = mask {
        if m.width != w || m.height != h {
            return Err(Error::Shape(format!("mask {}x{} vs image {w}x{h}", m.width, m.height)));
        }
    }
    let (size, sigma) = window_for(w, h)?;
    let k = gaussian(size, sigma);
    let r = size / 2;
    let weight: Vec<f64> = (0..w * h)
        .map(|i| match mask {
            Some((m, keep_static)) => (m.is_static(i % w, i / w) == keep_static) as u8 as f64,
            None => 1.0,
        })
        .collect();
    let (wsum, ow, oh) = filter(&weight, w, h, &k);
    let mut total = 0.0;
    let mut windows = 0usize;
    for c in 0..3 {
        let pa = a.channel(c);
        let pb = b.channel(c);
        let prod = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..w * h).map(|i| weight[i] * f(i)).collect() };
        let (ma, _, _) = filter(&prod(&|i| pa[i]), w, h, &k);
        let (mb, _, _) = filter(&prod(&|i| pb[i]), w, h, &k);
        let (saa, _, _) = filter(&prod(&|i| pa[i] * pa[i]), w, h, &k);
        let (sbb, _, _) = filter(&prod(&|i| pb[i] * pb[i]), w, h, &k);
        let (sab, _, _) = filter(&prod(&|i| pa[i] * pb[i]), w, h, &k);
        for y in 0..oh {
            for x in 0..ow {
                let centre = (y + r) * w + x + r;
                if weight[centre] == 0.0 {
                    continue;
                }
                let i = y * ow + x;
                let ws = wsum[i];
                let (mua, mub) = (ma[i] / ws, mb[i] / ws);
                let va = saa[i] / ws - mua * mua;
                let vb = sbb[i] / ws - mub * mub;
                let cov = sab[i] / ws - mua * mub;
                let s = ((2.0 * mua * mub + C1) * (2.0 * cov + C2)) / ((mua * mua + mub * mub + C1) * (va + vb + C2));
                total += s;
                if c == 0 {
                    windows += 1;
                }
            }
        }
    }
    if windows == 0 {
        return Err(Error::Argument("mask selects no SSIM window".into()));
    }
    Ok((total / (3 * windows) as f64).clamp(-1.0, 1.0))
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ssim_masked(a, b, None)
}

/// SSIM restricted to the static (true) or dynamic (false) part of `mask`.
pub fn masked_ssim(a: &Image, b: &Image, mask: &Mask, keep_static: bool) -> Result<f64> {
    ssim_masked(a, b, Some((mask, keep_static)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(seed: u64, side: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(side, side, |_, _| [rng.random_range(-1.0..1.0); 3])
    }

    #[test]
    fn self_similarity_is_one() {
        let a = noise(1, 24);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverted_checkerboard_is_dissimilar() {
        let a = Image::from_fn(32, 32, |x, y| if (x + y) % 2 == 0 { [1.0; 3] } else { [-1.0; 3] });
        let b = a.map(|v| -v);
        assert!(ssim(&a, &b).unwrap() < 0.1);
    }

    #[test]
    fn symmetric_and_bounded() {
        let (a, b) = (noise(1, 20), noise(2, 20));
        let ab = ssim(&a, &b).unwrap();
        assert!((ab - ssim(&b, &a).unwrap()).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn mask_locality() {
        let a = noise(1, 24);
        let mut b = a.clone();
        let mask = Mask::horizon_split(24, 24, 0.5);
        for y in 0..12 {
            for x in 0..24 {
                b.set(x, y, 0, 0.9);
            }
        }
        assert_eq!(masked_ssim(&a, &b, &mask, true).unwrap(), 1.0);
        assert!(masked_ssim(&a, &b, &mask, false).unwrap() < 1.0);
        assert!(masked_ssim(&a, &b, &Mask::filled(24, 24, 0), true).is_err());
    }

    #[test]
    fn small_images_use_a_smaller_window() {
        let a = noise(3, 8);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }
}
