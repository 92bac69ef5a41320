use serde::{Deserialize, Serialize};

use super::homography::{Homography, ReflectedField};
use crate::error::{Error, Result};
use crate::model::NoiseMap;

/// How lattice positions outside a noise map are filled when warping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OutOfField {
    /// Unit-normal values from a stream keyed by `seed` and lattice position,
    /// so exposed regions stay consistent from frame to frame.
    FreshNormal { seed: u64 },
    ReflectPad,
}

impl Default for OutOfField {
    fn default() -> Self {
        OutOfField::FreshNormal { seed: 0 }
    }
}

fn mix(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

fn hash_normal(seed: u64, level: u64, x: i64, y: i64) -> f32 {
    let key = mix(seed ^ mix(level.wrapping_add(0x9E37_79B9_7F4A_7C15)))
        ^ mix((x as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
        ^ mix((y as u64).wrapping_mul(0x1656_67B1_9E37_79F9).wrapping_add(1));
    let a = mix(key);
    let b = mix(key ^ 0xD6E8_FEB8_6659_FD93);
    let u1 = ((a >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    ((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()) as f32
}

fn reflect_index(i: i64, n: i64) -> i64 {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    if m < n {
        m
    } else {
        period - m
    }
}

fn lattice(map: &NoiseMap, fill: OutOfField, level: usize, x: i64, y: i64) -> f32 {
    let n = map.side as i64;
    if (0..n).contains(&x) && (0..n).contains(&y) {
        return map.get(x as usize, y as usize);
    }
    match fill {
        OutOfField::FreshNormal { seed } => hash_normal(seed, level as u64, x, y),
        OutOfField::ReflectPad => map.get(reflect_index(x, n) as usize, reflect_index(y, n) as usize),
    }
}

/// Bilinear sample at a continuous pixel position (pixel centres at integers).
fn sample(map: &NoiseMap, fill: OutOfField, level: usize, px: f64, py: f64) -> f32 {
    let x0 = px.floor();
    let y0 = py.floor();
    let fx = px - x0;
    let fy = py - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let v00 = lattice(map, fill, level, x0, y0) as f64;
    let v10 = lattice(map, fill, level, x0 + 1, y0) as f64;
    let v01 = lattice(map, fill, level, x0, y0 + 1) as f64;
    let v11 = lattice(map, fill, level, x0 + 1, y0 + 1) as f64;
    let top = v00 + (v10 - v00) * fx;
    let bottom = v01 + (v11 - v01) * fx;
    (top + (bottom - top) * fy) as f32
}

/// Resamples one map so content moves along `field`.
pub fn warp_map(map: &NoiseMap, field: &ReflectedField, fill: OutOfField, level: usize) -> Result<NoiseMap> {
    let back = field.inverse()?;
    let side = map.side;
    let s = side as f64;
    let mut data = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let p = [(x as f64 + 0.5) / s, (y as f64 + 0.5) / s];
            let q = back.map(p);
            if !(q[0].is_finite() && q[1].is_finite()) {
                return Err(Error::Numeric("warp maps a pixel to infinity".into()));
            }
            data.push(sample(map, fill, level, q[0] * s - 0.5, q[1] * s - 0.5));
        }
    }
    Ok(NoiseMap { side, data })
}

/// Dynamic noise of frame `i` (1-based): `h^(i-1)` with horizon reflection,
/// applied to the base maps with one resampling per map.
pub fn warp_dynamic_noise(base: &[NoiseMap], h: &Homography, frame_index: u32, fill: OutOfField) -> Result<Vec<NoiseMap>> {
    if frame_index < 1 {
        return Err(Error::Argument("frame index starts at 1".into()));
    }
    if frame_index == 1 {
        return Ok(base.to_vec());
    }
    let effective = h.power(frame_index - 1)?;
    warp_with(base, &effective, fill)
}

/// Warps every map by an explicit effective transform.
pub fn warp_with(base: &[NoiseMap], effective: &Homography, fill: OutOfField) -> Result<Vec<NoiseMap>> {
    let field = ReflectedField::new(*effective)?;
    base.iter()
        .enumerate()
        .map(|(level, m)| warp_map(m, &field, fill, level))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn maps() -> Vec<NoiseMap> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        [4, 8, 16].iter().map(|&s| NoiseMap::sample(&mut rng, s)).collect()
    }

    #[test]
    fn first_frame_is_untouched() {
        let base = maps();
        let h = Homography::from_displacements(&[[0.1, 0.0]; 4], 0.5).unwrap();
        let out = warp_dynamic_noise(&base, &h, 1, OutOfField::default()).unwrap();
        assert!(out.iter().zip(&base).all(|(a, b)| a.bit_eq(b)));
        assert!(warp_dynamic_noise(&base, &h, 0, OutOfField::default()).is_err());
    }

    #[test]
    fn identity_warp_preserves_maps() {
        let base = maps();
        let out = warp_dynamic_noise(&base, &Homography::identity(0.5), 5, OutOfField::ReflectPad).unwrap();
        for (a, b) in out.iter().zip(&base) {
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| (x - y).abs() < 1e-5));
        }
    }

    #[test]
    fn whole_pixel_shift_moves_content() {
        let base = maps();
        let side = 16.0;
        let h = Homography::from_displacements(&[[1.0 / side, 0.0]; 4], 0.5).unwrap();
        let out = warp_dynamic_noise(&base, &h, 3, OutOfField::FreshNormal { seed: 4 }).unwrap();
        let (a, b) = (&out[2], &base[2]);
        for y in 0..16 {
            for x in 2..16 {
                assert!((a.get(x, y) - b.get(x - 2, y)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn exposed_fill_is_roughly_unit_normal() {
        let vals: Vec<f64> = (0..20000).map(|k| hash_normal(3, 0, -1 - k, k % 7) as f64).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05);
    }

    #[test]
    fn reflect_index_bounces() {
        let got: Vec<i64> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }
}
