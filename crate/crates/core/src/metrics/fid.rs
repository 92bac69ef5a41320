use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running mean and co-moment of feature vectors; merging is order independent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub count: u64,
    pub mean: Vec<f64>,
    /// Sum of outer products of deviations from the mean.
    pub comoment: Vec<f64>,
}

impl FeatureStats {
    pub fn empty(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        let mut s = Self::empty(dim);
        for r in rows {
            s.push(r)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("feature length {} vs {}", x.len(), self.dim())));
        }
        self.count += 1;
        let n = self.count as f64;
        let d = self.dim();
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[i * d + j] += delta[j] * after;
            }
        }
        // keep exact symmetry
        for i in 0..d {
            for j in 0..i {
                let v = 0.5 * (self.comoment[i * d + j] + self.comoment[j * d + i]);
                self.comoment[i * d + j] = v;
                self.comoment[j * d + i] = v;
            }
        }
        Ok(())
    }

    /// Pairwise combination of two partial accumulations.
    pub fn merge(&self, other: &FeatureStats) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension("cannot merge statistics of different widths".into()));
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = self.dim();
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self.mean.iter().zip(&delta).map(|(a, dl)| a + dl * nb / n).collect();
        let mut comoment = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                comoment[i * d + j] =
                    self.comoment[i * d + j] + other.comoment[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        Ok(Self {
            count: self.count + other.count,
            mean,
            comoment,
        })
    }

    /// Unbiased covariance.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        if self.count < 2 {
            return Err(Error::Data("covariance needs at least two samples".into()));
        }
        let d = self.dim();
        Ok(DMatrix::from_row_slice(d, d, &self.comoment) / (self.count - 1) as f64)
    }

    /// Statistics with an explicit mean and covariance, e.g. for closed-form checks.
    pub fn from_moments(mean: Vec<f64>, covariance: &DMatrix<f64>, count: u64) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d || count < 2 {
            return Err(Error::Dimension("covariance shape or count does not match the mean".into()));
        }
        let scaled = covariance * (count - 1) as f64;
        Ok(Self {
            count,
            mean,
            comoment: scaled.transpose().as_slice().to_vec(),
        })
    }
}

const NEG_TOL: f64 = 1e-8;

fn symmetric_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -NEG_TOL * scale {
        return Err(Error::Numeric(format!(
            "{what} is not positive semidefinite: smallest eigenvalue {min:e}, largest magnitude {scale:e}"
        )));
    }
    let roots = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// `||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))`, with the trace of the
/// cross term taken as `Tr((S1^(1/2) S2 S1^(1/2))^(1/2))`, which is symmetric.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("feature widths {} and {}", a.dim(), b.dim())));
    }
    let s1 = a.covariance()?;
    let s2 = b.covariance()?;
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y).powi(2)).sum();
    let r1 = symmetric_sqrt(&s1, "first covariance")?;
    let inner = &r1 * &s2 * &r1;
    let cross = symmetric_sqrt(&inner, "covariance product")?;
    let d = mean_term + s1.trace() + s2.trace() - 2.0 * cross.trace();
    if !d.is_finite() {
        return Err(Error::Numeric("Frechet distance is not finite".into()));
    }
    Ok(d.max(0.0))
}

/// Frechet distance between two feature matrices given row-wise.
pub fn fid_from_features(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    frechet_distance(&FeatureStats::from_rows(a)?, &FeatureStats::from_rows(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rows(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn identical_sets_score_zero() {
        let x = rows(1, 50, 6);
        assert!(fid_from_features(&x, &x).unwrap().abs() < 1e-6);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let a = FeatureStats::from_moments(vec![0.3], &DMatrix::from_element(1, 1, 4.0), 10).unwrap();
        let b = FeatureStats::from_moments(vec![-1.2], &DMatrix::from_element(1, 1, 0.25), 10).unwrap();
        let want = 1.5f64.powi(2) + (2.0f64 - 0.5).powi(2);
        assert!((frechet_distance(&a, &b).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn symmetric_in_arguments() {
        let (x, y) = (rows(1, 40, 5), rows(2, 60, 5));
        let ab = fid_from_features(&x, &y).unwrap();
        let ba = fid_from_features(&y, &x).unwrap();
        assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn merge_matches_single_pass() {
        let x = rows(3, 30, 4);
        let whole = FeatureStats::from_rows(&x).unwrap();
        let merged = FeatureStats::from_rows(&x[..11])
            .unwrap()
            .merge(&FeatureStats::from_rows(&x[11..]).unwrap())
            .unwrap();
        assert_eq!(whole.count, merged.count);
        for (a, b) in whole.comoment.iter().zip(&merged.comoment) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let mut c = DMatrix::identity(2, 2);
        c[(1, 1)] = -1.0;
        let a = FeatureStats::from_moments(vec![0.0, 0.0], &c, 5).unwrap();
        assert!(matches!(frechet_distance(&a, &a), Err(Error::Numeric(_))));
    }
}
