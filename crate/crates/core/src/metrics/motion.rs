use crate::error::{Error, Result};
use crate::imaging::{check_same, Image, Mask};

/// Mean optical-flow magnitude (pixels) between two frames over the selected region.
pub trait FlowProvider {
    fn mean_flow(&self, a: &Image, b: &Image, region: &Mask, keep_static: bool) -> Result<f64>;
}

/// Exhaustive block matching on luminance with parabolic sub-pixel refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockMatching {
    pub block: usize,
    pub stride: usize,
    pub radius: usize,
}

impl Default for BlockMatching {
    fn default() -> Self {
        Self {
            block: 8,
            stride: 4,
            radius: 3,
        }
    }
}

fn luma(img: &Image) -> Vec<f64> {
    (0..img.width * img.height)
        .map(|i| {
            let p = img.pixel(i % img.width, i / img.width);
            0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
        })
        .collect()
}

fn refine(minus: f64, centre: f64, plus: f64) -> f64 {
    let denom = minus - 2.0 * centre + plus;
    if denom > 1e-12 {
        (0.5 * (minus - plus) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

impl FlowProvider for BlockMatching {
    fn mean_flow(&self, a: &Image, b: &Image, region: &Mask, keep_static: bool) -> Result<f64> {
        check_same(a, b)?;
        if region.width != a.width || region.height != a.height {
            return Err(Error::Shape("region mask differs from frame size".into()));
        }
        let (w, h) = (a.width, a.height);
        let (bs, r) = (self.block, self.radius);
        if bs == 0 || self.stride == 0 || w < bs + 2 * r + 2 || h < bs + 2 * r + 2 {
            return Err(Error::Argument("frames too small for block matching".into()));
        }
        let (la, lb) = (luma(a), luma(b));
        let sad = |x0: usize, y0: usize, dx: i64, dy: i64| -> f64 {
            let mut s = 0.0;
            for y in 0..bs {
                for x in 0..bs {
                    let (ax, ay) = (x0 + x, y0 + y);
                    let bx = (ax as i64 + dx) as usize;
                    let by = (ay as i64 + dy) as usize;
                    s += (la[ay * w + ax] - lb[by * w + bx]).powi(2);
                }
            }
            s
        };
        let ri = r as i64;
        let mut total = 0.0;
        let mut count = 0usize;
        let lo = r + 1;
        let mut y0 = lo;
        while y0 + bs + r + 1 <= h {
            let mut x0 = lo;
            while x0 + bs + r + 1 <= w {
                if region.is_static(x0 + bs / 2, y0 + bs / 2) == keep_static {
                    let mut best = (0i64, 0i64, sad(x0, y0, 0, 0));
                    for dy in -ri..=ri {
                        for dx in -ri..=ri {
                            let s = sad(x0, y0, dx, dy);
                            if s < best.2 {
                                best = (dx, dy, s);
                            }
                        }
                    }
                    let (dx, dy, s0) = best;
                    let (fx, fy) = if s0 == 0.0 {
                        (dx as f64, dy as f64)
                    } else {
                        (
                            dx as f64 + refine(sad(x0, y0, dx - 1, dy), s0, sad(x0, y0, dx + 1, dy)),
                            dy as f64 + refine(sad(x0, y0, dx, dy - 1), s0, sad(x0, y0, dx, dy + 1)),
                        )
                    };
                    total += (fx * fx + fy * fy).sqrt();
                    count += 1;
                }
                x0 += self.stride;
            }
            y0 += self.stride;
        }
        if count == 0 {
            return Err(Error::Argument("region contains no matching block".into()));
        }
        Ok(total / count as f64)
    }
}

/// Mean flow magnitude over the dynamic part of `mask` and all consecutive
/// frame transitions.
pub fn motion_amount(frames: &[Image], sky: &Mask, provider: Option<&dyn FlowProvider>) -> Result<f64> {
    let provider = provider.ok_or_else(|| Error::Config("no optical-flow provider configured".into()))?;
    if frames.len() < 2 {
        return Err(Error::Argument("motion needs at least two frames".into()));
    }
    let mut sum = 0.0;
    for pair in frames.windows(2) {
        sum += provider.mean_flow(&pair[0], &pair[1], sky, false)?;
    }
    Ok(sum / (frames.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(x: f64, y: f64) -> f32 {
        ((x * 0.9).sin() * (y * 0.7).cos() + 0.5 * (x * 0.37 + y * 0.53).sin()) as f32 * 0.6
    }

    #[test]
    fn still_frames_have_no_motion() {
        let f = Image::from_fn(32, 32, |x, y| [texture(x as f64, y as f64); 3]);
        let sky = Mask::filled(32, 32, 0);
        let m = motion_amount(&[f.clone(), f.clone(), f], &sky, Some(&BlockMatching::default())).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn one_pixel_translation_reads_about_one() {
        let frames: Vec<Image> = (0..4)
            .map(|t| Image::from_fn(48, 48, |x, y| [texture(x as f64 - t as f64, y as f64); 3]))
            .collect();
        let sky = Mask::filled(48, 48, 0);
        let m = motion_amount(&frames, &sky, Some(&BlockMatching::default())).unwrap();
        assert!((m - 1.0).abs() < 0.2, "{m}");
    }

    #[test]
    fn missing_provider_is_a_config_error() {
        let f = Image::new(16, 16);
        assert!(matches!(motion_amount(&[f.clone(), f], &Mask::filled(16, 16, 0), None), Err(Error::Config(_))));
    }
}
