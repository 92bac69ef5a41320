use crate::error::{Error, Result};
use crate::imaging::{check_same, Image};

/// Window means over `(2r+1)^2` boxes clipped at the border, via an integral image.
pub fn box_mean(plane: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    let stride = width + 1;
    let mut integral = vec![0f64; stride * (height + 1)];
    for y in 0..height {
        let mut row = 0.0;
        for x in 0..width {
            row += plane[y * width + x];
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }
    let mut out = vec![0f64; width * height];
    for y in 0..height {
        let (y0, y1) = (y.saturating_sub(radius), (y + radius + 1).min(height));
        for x in 0..width {
            let (x0, x1) = (x.saturating_sub(radius), (x + radius + 1).min(width));
            let sum = integral[y1 * stride + x1] - integral[y0 * stride + x1] - integral[y1 * stride + x0]
                + integral[y0 * stride + x0];
            out[y * width + x] = sum / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

/// Guided filter on one plane: per-window linear model `q = a * I + b`,
/// coefficients averaged over all windows covering each pixel.
pub fn guided_filter_plane(guide: &[f64], src: &[f64], width: usize, height: usize, radius: usize, eps: f64) -> Result<Vec<f64>> {
    let n = width * height;
    if guide.len() != n || src.len() != n {
        return Err(Error::Shape("guide and source planes differ from the stated size".into()));
    }
    if radius == 0 || radius >= width.min(height) {
        return Err(Error::Argument(format!("guided-filter radius {radius} must lie in 1..{}", width.min(height))));
    }
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("guided-filter eps {eps} must be positive")));
    }
    let mean_i = box_mean(guide, width, height, radius);
    let mean_p = box_mean(src, width, height, radius);
    let ii: Vec<f64> = guide.iter().map(|v| v * v).collect();
    let ip: Vec<f64> = guide.iter().zip(src).map(|(a, b)| a * b).collect();
    let corr_ii = box_mean(&ii, width, height, radius);
    let corr_ip = box_mean(&ip, width, height, radius);
    let mut a = vec![0f64; n];
    let mut b = vec![0f64; n];
    for k in 0..n {
        let var = corr_ii[k] - mean_i[k] * mean_i[k];
        let cov = corr_ip[k] - mean_i[k] * mean_p[k];
        a[k] = cov / (var + eps);
        b[k] = mean_p[k] - a[k] * mean_i[k];
    }
    let mean_a = box_mean(&a, width, height, radius);
    let mean_b = box_mean(&b, width, height, radius);
    Ok((0..n).map(|k| mean_a[k] * guide[k] + mean_b[k]).collect())
}

/// Channel-wise guided filter; channel `c` of `guide` steers channel `c` of `src`.
pub fn guided_filter(guide: &Image, src: &Image, radius: usize, eps: f64) -> Result<Image> {
    check_same(guide, src)?;
    let (w, h) = (guide.width, guide.height);
    let planes: Vec<Vec<f64>> = (0..3)
        .map(|c| guided_filter_plane(&guide.channel(c), &src.channel(c), w, h, radius, eps))
        .collect::<Result<_>>()?;
    Ok(Image::from_channels(w, h, &[planes[0].clone(), planes[1].clone(), planes[2].clone()]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(guide: &[f64], src: &[f64], w: usize, h: usize, r: usize, eps: f64) -> Vec<f64> {
        let window = |cx: usize, cy: usize| {
            let mut idx = Vec::new();
            for y in cy.saturating_sub(r)..(cy + r + 1).min(h) {
                for x in cx.saturating_sub(r)..(cx + r + 1).min(w) {
                    idx.push(y * w + x);
                }
            }
            idx
        };
        let mut coef = vec![(0.0, 0.0); w * h];
        for cy in 0..h {
            for cx in 0..w {
                let idx = window(cx, cy);
                let n = idx.len() as f64;
                let mi = idx.iter().map(|&k| guide[k]).sum::<f64>() / n;
                let mp = idx.iter().map(|&k| src[k]).sum::<f64>() / n;
                let var = idx.iter().map(|&k| (guide[k] - mi).powi(2)).sum::<f64>() / n;
                let cov = idx.iter().map(|&k| (guide[k] - mi) * (src[k] - mp)).sum::<f64>() / n;
                let a = cov / (var + eps);
                coef[cy * w + cx] = (a, mp - a * mi);
            }
        }
        (0..w * h)
            .map(|k| {
                let idx = window(k % w, k / w);
                let n = idx.len() as f64;
                let a = idx.iter().map(|&j| coef[j].0).sum::<f64>() / n;
                let b = idx.iter().map(|&j| coef[j].1).sum::<f64>() / n;
                a * guide[k] + b
            })
            .collect()
    }

    fn plane(w: usize, h: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..w * h).map(|k| f((k % w) as f64, (k / w) as f64)).collect()
    }

    #[test]
    fn matches_sliding_window_oracle() {
        let (w, h) = (16, 16);
        let g = plane(w, h, |x, y| (0.7 * x).sin() + 0.3 * (0.4 * y).cos() + if x > 8.0 { 0.5 } else { -0.2 });
        let p = plane(w, h, |x, y| (0.2 * x * y).cos() * 0.6 + 0.1 * x);
        for (r, eps) in [(1, 1e-4), (2, 1e-2), (4, 0.1)] {
            let fast = guided_filter_plane(&g, &p, w, h, r, eps).unwrap();
            let slow = brute(&g, &p, w, h, r, eps);
            let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "r={r}: {err}");
        }
    }

    #[test]
    fn constants_and_linear_sources_are_reproduced() {
        let (w, h) = (20, 12);
        let g = plane(w, h, |x, y| (0.5 * x).sin() + 0.1 * y);
        let c = vec![0.37; w * h];
        let out = guided_filter_plane(&g, &c, w, h, 3, 1e-4).unwrap();
        assert!(out.iter().all(|v| (v - 0.37).abs() < 1e-12));
        let lin: Vec<f64> = g.iter().map(|v| 2.5 * v - 0.4).collect();
        let out = guided_filter_plane(&g, &lin, w, h, 3, 1e-12).unwrap();
        let err = out.iter().zip(&lin).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn self_guided_tends_to_identity() {
        let (w, h) = (24, 24);
        let g = plane(w, h, |x, y| ((0.9 * x).sin() * (0.6 * y).cos()) * 0.8);
        let out = guided_filter_plane(&g, &g, w, h, 2, 1e-8).unwrap();
        let mae = out.iter().zip(&g).map(|(a, b)| (a - b).abs()).sum::<f64>() / g.len() as f64;
        assert!(mae < 1e-3, "{mae}");
    }

    #[test]
    fn oversized_radius_is_rejected() {
        let g = vec![0.0; 64];
        assert!(matches!(guided_filter_plane(&g, &g, 8, 8, 8, 1e-4), Err(Error::Argument(_))));
        assert!(guided_filter_plane(&g, &g, 8, 8, 0, 1e-4).is_err());
        assert!(guided_filter_plane(&g, &g, 8, 8, 2, 0.0).is_err());
    }
}
