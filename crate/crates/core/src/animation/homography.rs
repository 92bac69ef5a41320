use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Projective transform of normalized image coordinates (x right, y down,
/// unit square), plus the horizon used for reflection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    pub matrix: [[f64; 3]; 3],
    pub horizon_y: f64,
}

fn collinear(a: Point, b: Point, c: Point) -> bool {
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let scale = [a, b, c]
        .iter()
        .flat_map(|p| p.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    cross.abs() <= 1e-12 * scale * scale
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn normalizer(points: &[Point; 4]) -> Matrix3<f64> {
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / 4.0;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / 4.0;
    let mean = points
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / 4.0;
    let s = if mean > 0.0 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn apply(m: &Matrix3<f64>, p: Point) -> Point {
    let v = m * Vector3::new(p[0], p[1], 1.0);
    [v.x / v.z, v.y / v.z]
}

impl Homography {
    pub fn identity(horizon_y: f64) -> Self {
        Self::from_matrix(Matrix3::identity(), horizon_y).expect("identity is invertible")
    }

    /// Scales so the bottom-right entry is one; rejects singular matrices.
    pub fn from_matrix(m: Matrix3<f64>, horizon_y: f64) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite homography".into()));
        }
        if m[(2, 2)].abs() < 1e-12 {
            return Err(Error::Singular("homography has a vanishing bottom-right entry".into()));
        }
        let m = m / m[(2, 2)];
        if m.determinant().abs() <= 1e-12 {
            return Err(Error::Singular("homography is not invertible".into()));
        }
        let mut matrix = [[0.0; 3]; 3];
        for (r, row) in matrix.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        Ok(Self { matrix, horizon_y })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.matrix[r][c])
    }

    /// Direct linear transform from four correspondences, computed in
    /// normalized coordinates and mapped back.
    pub fn from_correspondences(src: &[Point; 4], dst: &[Point; 4], horizon_y: f64) -> Result<Self> {
        for pts in [src, dst] {
            if pts.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Argument("non-finite correspondence".into()));
            }
            for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
                if collinear(pts[i], pts[j], pts[k]) {
                    return Err(Error::Singular("three correspondence points are collinear".into()));
                }
            }
        }
        let ts = normalizer(src);
        let td = normalizer(dst);
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for i in 0..4 {
            let [x, y] = apply(&ts, src[i]);
            let [u, v] = apply(&td, dst[i]);
            let r = 2 * i;
            a.row_mut(r).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
            a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
            b[r] = u;
            b[r + 1] = v;
        }
        let h = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular("degenerate correspondences".into()))?;
        let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
        let td_inv = td
            .try_inverse()
            .ok_or_else(|| Error::Singular("degenerate correspondences".into()))?;
        Self::from_matrix(td_inv * hn * ts, horizon_y)
    }

    /// The four reference points: upper corners, then the horizon ends.
    pub fn reference_points(horizon_y: f64) -> [Point; 4] {
        [[0.0, 0.0], [1.0, 0.0], [0.0, horizon_y], [1.0, horizon_y]]
    }

    /// Homography moving the reference points by the given displacements.
    pub fn from_displacements(displacements: &[Point; 4], horizon_y: f64) -> Result<Self> {
        if !(horizon_y > 0.0 && horizon_y < 1.0) {
            return Err(Error::Argument(format!("horizon_y {horizon_y} outside (0, 1)")));
        }
        let src = Self::reference_points(horizon_y);
        let dst = std::array::from_fn(|i| [src[i][0] + displacements[i][0], src[i][1] + displacements[i][1]]);
        Self::from_correspondences(&src, &dst, horizon_y)
    }

    pub fn map_point(&self, p: Point) -> Point {
        apply(&self.matrix(), p)
    }

    /// Displacements of the reference points under this transform.
    pub fn displacements(&self) -> [Point; 4] {
        let src = Self::reference_points(self.horizon_y);
        std::array::from_fn(|i| {
            let q = self.map_point(src[i]);
            [q[0] - src[i][0], q[1] - src[i][1]]
        })
    }

    /// Same motion with reference-point displacements multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::Argument(format!("speed scale {scale} must be finite and non-negative")));
        }
        let d = self.displacements().map(|p| [p[0] * scale, p[1] * scale]);
        Self::from_displacements(&d, self.horizon_y)
    }

    /// `h^k` by repeated squaring, `h^0` being the identity.
    pub fn power(&self, k: u32) -> Result<Self> {
        let mut result = Matrix3::identity();
        let mut base = self.matrix();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = base * result;
            }
            base = base * base;
            base /= base[(2, 2)];
            result /= result[(2, 2)];
            e >>= 1;
        }
        Self::from_matrix(result, self.horizon_y)
    }

    pub fn compose(&self, other: &Homography) -> Result<Self> {
        Self::from_matrix(self.matrix() * other.matrix(), self.horizon_y)
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .matrix()
            .try_inverse()
            .ok_or_else(|| Error::Singular("homography is not invertible".into()))?;
        Self::from_matrix(inv, self.horizon_y)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        self.matrix
            .iter()
            .flatten()
            .zip(other.matrix.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Vertical reflection about the horizon line.
pub fn reflect_point(p: Point, horizon_y: f64) -> Point {
    [p[0], 2.0 * horizon_y - p[1]]
}

/// Point map applying `h` above the horizon and its reflection `V h V`
/// below it, where `V` mirrors about the horizon line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectedField {
    pub homography: Homography,
}

impl ReflectedField {
    pub fn new(h: Homography) -> Result<Self> {
        if !(h.horizon_y > 0.0 && h.horizon_y < 1.0) {
            return Err(Error::Argument(format!("horizon_y {} outside (0, 1)", h.horizon_y)));
        }
        Ok(Self { homography: h })
    }

    pub fn map(&self, p: Point) -> Point {
        let yh = self.homography.horizon_y;
        if p[1] < yh {
            self.homography.map_point(p)
        } else {
            reflect_point(self.homography.map_point(reflect_point(p, yh)), yh)
        }
    }

    /// Field of the inverse motion, used to look up where warped content came from.
    pub fn inverse(&self) -> Result<Self> {
        Ok(Self {
            homography: self.homography.inverse()?,
        })
    }

    /// `V f V`: the same construction with the roles of the two sides swapped.
    pub fn conjugated(&self) -> ConjugatedField {
        ConjugatedField { inner: *self }
    }
}

/// A field conjugated by the horizon reflection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugatedField {
    inner: ReflectedField,
}

impl ConjugatedField {
    pub fn map(&self, p: Point) -> Point {
        let yh = self.inner.homography.horizon_y;
        reflect_point(self.inner.map(reflect_point(p, yh)), yh)
    }

    pub fn conjugated(&self) -> ReflectedField {
        self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_displacement_is_identity() {
        let h = Homography::from_displacements(&[[0.0; 2]; 4], 0.5).unwrap();
        assert!(h.max_abs_diff(&Homography::identity(0.5)) < 1e-9);
    }

    #[test]
    fn uniform_shift_is_translation() {
        let h = Homography::from_displacements(&[[0.1, 0.0]; 4], 0.4).unwrap();
        let want = Matrix3::new(1.0, 0.0, 0.1, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!((h.matrix() - want).abs().max() < 1e-12);
    }

    #[test]
    fn collinear_points_are_singular() {
        let src = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.0, 1.0]];
        let err = Homography::from_correspondences(&src, &src, 0.5).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
    }

    #[test]
    fn power_zero_and_one() {
        let h = Homography::from_displacements(&[[0.01, -0.02], [0.03, 0.0], [0.0, 0.01], [0.02, 0.0]], 0.5).unwrap();
        assert!(h.power(0).unwrap().max_abs_diff(&Homography::identity(0.5)) < 1e-15);
        assert!(h.power(1).unwrap().max_abs_diff(&h) < 1e-15);
    }

    #[test]
    fn reflection_flips_vertical_motion() {
        let up = Homography::from_displacements(&[[0.0, -0.05]; 4], 0.5).unwrap();
        let f = ReflectedField::new(up).unwrap();
        let above = f.map([0.3, 0.2]);
        let below = f.map([0.3, 0.8]);
        assert!(above[1] < 0.2 && below[1] > 0.8);
        let right = ReflectedField::new(Homography::from_displacements(&[[0.05, 0.0]; 4], 0.5).unwrap()).unwrap();
        assert!((right.map([0.3, 0.8])[0] - 0.35).abs() < 1e-12);
    }

    #[test]
    fn scaling_by_zero_gives_identity() {
        let h = Homography::from_displacements(&[[0.01, -0.02], [0.03, 0.0], [0.0, 0.01], [0.02, 0.0]], 0.5).unwrap();
        assert!(h.scaled(0.0).unwrap().max_abs_diff(&Homography::identity(0.5)) < 1e-12);
        assert!(h.scaled(1.0).unwrap().max_abs_diff(&h) < 1e-12);
    }
}
