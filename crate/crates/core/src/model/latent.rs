use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use tensor::Tensor;

use super::config::GeneratorConfig;
use crate::error::{Error, Result};

pub(crate) fn normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
}

/// Static and dynamic input latents; their concatenation feeds the mapping network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub z_static: Vec<f32>,
    pub z_dynamic: Vec<f32>,
}

impl LatentCode {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, config: &GeneratorConfig) -> Self {
        let z_static = normal_vec(rng, config.static_dim());
        let z_dynamic = normal_vec(rng, config.dynamic_dim);
        Self { z_static, z_dynamic }
    }

    pub fn concat(&self) -> Vec<f32> {
        let mut z = self.z_static.clone();
        z.extend_from_slice(&self.z_dynamic);
        z
    }

    pub fn with_dynamic(&self, z_dynamic: Vec<f32>) -> Self {
        Self {
            z_static: self.z_static.clone(),
            z_dynamic,
        }
    }

    pub fn validate(&self, config: &GeneratorConfig) -> Result<()> {
        if self.z_static.len() != config.static_dim() || self.z_dynamic.len() != config.dynamic_dim {
            return Err(Error::Dimension(format!(
                "latent code has {}+{} entries, expected {}+{}",
                self.z_static.len(),
                self.z_dynamic.len(),
                config.static_dim(),
                config.dynamic_dim
            )));
        }
        if !self.z_static.iter().chain(&self.z_dynamic).all(|v| v.is_finite()) {
            return Err(Error::Numeric("latent code is not finite".into()));
        }
        Ok(())
    }
}

/// One style vector per synthesis block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleSet {
    pub styles: Vec<Vec<f32>>,
}

impl StyleSet {
    pub fn uniform(w: &[f32], num_blocks: usize) -> Self {
        Self {
            styles: vec![w.to_vec(); num_blocks],
        }
    }

    pub fn len(&self) -> usize {
        self.styles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.styles.is_empty()
    }

    pub fn validate(&self, config: &GeneratorConfig) -> Result<()> {
        if self.styles.len() != config.num_blocks {
            return Err(Error::Dimension(format!(
                "{} styles for {} blocks",
                self.styles.len(),
                config.num_blocks
            )));
        }
        for s in &self.styles {
            if s.len() != config.style_dim {
                return Err(Error::Dimension(format!(
                    "style of length {}, expected {}",
                    s.len(),
                    config.style_dim
                )));
            }
            if !s.iter().all(|v| v.is_finite()) {
                return Err(Error::Numeric("style vector is not finite".into()));
            }
        }
        Ok(())
    }

    /// Per-block `[B, style_dim]` tensors for a batch of style sets.
    pub fn batch_tensors(sets: &[StyleSet]) -> Vec<Tensor> {
        let n = sets[0].styles.len();
        let d = sets[0].styles[0].len();
        (0..n)
            .map(|b| {
                let data: Vec<f32> = sets.iter().flat_map(|s| s.styles[b].iter().copied()).collect();
                Tensor::new(data, &[sets.len(), d])
            })
            .collect()
    }

    pub fn from_batch_tensors(tensors: &[Tensor], index: usize) -> StyleSet {
        StyleSet {
            styles: tensors
                .iter()
                .map(|t| {
                    let d = t.shape()[1];
                    t.data()[index * d..(index + 1) * d].to_vec()
                })
                .collect(),
        }
    }
}

/// Square noise map of side `side`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseMap {
    pub side: usize,
    pub data: Vec<f32>,
}

impl NoiseMap {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, side: usize) -> Self {
        Self {
            side,
            data: normal_vec(rng, side * side),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.side + x]
    }

    pub fn bit_eq(&self, other: &NoiseMap) -> bool {
        self.side == other.side
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Static and dynamic noise maps, one of each per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialNoiseSet {
    pub static_maps: Vec<NoiseMap>,
    pub dynamic_maps: Vec<NoiseMap>,
}

impl SpatialNoiseSet {
    pub fn zeros(config: &GeneratorConfig) -> Self {
        let maps: Vec<NoiseMap> = (1..=config.num_blocks)
            .map(|n| NoiseMap::zeros(config.resolution(n)))
            .collect();
        Self {
            static_maps: maps.clone(),
            dynamic_maps: maps,
        }
    }

    pub fn sample_static<R: Rng + ?Sized>(rng: &mut R, config: &GeneratorConfig) -> Vec<NoiseMap> {
        (1..=config.num_blocks)
            .map(|n| NoiseMap::sample(rng, config.resolution(n)))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, config: &GeneratorConfig) -> Self {
        let static_maps = Self::sample_static(rng, config);
        let dynamic_maps = Self::sample_static(rng, config);
        Self {
            static_maps,
            dynamic_maps,
        }
    }

    pub fn validate(&self, config: &GeneratorConfig) -> Result<()> {
        for maps in [&self.static_maps, &self.dynamic_maps] {
            if maps.len() != config.num_blocks {
                return Err(Error::Shape(format!(
                    "{} noise maps for {} blocks",
                    maps.len(),
                    config.num_blocks
                )));
            }
            for (i, m) in maps.iter().enumerate() {
                let want = config.resolution(i + 1);
                if m.side != want || m.data.len() != want * want {
                    return Err(Error::Shape(format!(
                        "noise map {} has side {}, expected {want}",
                        i + 1,
                        m.side
                    )));
                }
            }
        }
        Ok(())
    }

    /// `[B, 1, s, s]` tensors for block indices `0..count`.
    pub fn batch_tensors(sets: &[&SpatialNoiseSet], dynamic: bool, count: usize) -> Vec<Tensor> {
        (0..count)
            .map(|b| {
                let side = sets[0].static_maps[b].side;
                let data: Vec<f32> = sets
                    .iter()
                    .flat_map(|s| {
                        let m = if dynamic { &s.dynamic_maps[b] } else { &s.static_maps[b] };
                        m.data.iter().copied()
                    })
                    .collect();
                Tensor::new(data, &[sets.len(), 1, side, side])
            })
            .collect()
    }
}

/// Draws a latent code followed by static and dynamic noise maps.
pub fn sample_latents<R: Rng + ?Sized>(rng: &mut R, config: &GeneratorConfig) -> (LatentCode, SpatialNoiseSet) {
    let code = LatentCode::sample(rng, config);
    let noise = SpatialNoiseSet::sample(rng, config);
    (code, noise)
}

/// How several style vectors are spread over the blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixingRule {
    /// Every block uses the first vector.
    Single,
    /// Strictly increasing 1-based block indices at which the next vector takes over.
    Crossover(Vec<usize>),
}

impl MixingRule {
    /// With probability `prob` picks a single crossover among the first
    /// `active_blocks` blocks.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, prob: f64, active_blocks: usize) -> Self {
        if active_blocks >= 2 && prob > 0.0 && rng.random::<f64>() < prob {
            MixingRule::Crossover(vec![rng.random_range(2..=active_blocks)])
        } else {
            MixingRule::Single
        }
    }

    pub fn vectors_needed(&self) -> usize {
        match self {
            MixingRule::Single => 1,
            MixingRule::Crossover(p) => p.len() + 1,
        }
    }
}

pub fn broadcast_styles(w_list: &[Vec<f32>], rule: &MixingRule, num_blocks: usize) -> Result<StyleSet> {
    if w_list.is_empty() {
        return Err(Error::Argument("broadcast_styles needs at least one style".into()));
    }
    if w_list.len() > num_blocks {
        return Err(Error::Argument(format!(
            "{} styles for {num_blocks} blocks",
            w_list.len()
        )));
    }
    match rule {
        MixingRule::Single => Ok(StyleSet::uniform(&w_list[0], num_blocks)),
        MixingRule::Crossover(points) => {
            if points.len() + 1 != w_list.len() {
                return Err(Error::Argument(format!(
                    "{} crossover points need {} styles, got {}",
                    points.len(),
                    points.len() + 1,
                    w_list.len()
                )));
            }
            let valid = points.windows(2).all(|p| p[0] < p[1]) && points.iter().all(|&p| (2..=num_blocks).contains(&p));
            if !valid {
                return Err(Error::Argument(format!("invalid crossover points {points:?}")));
            }
            let styles = (1..=num_blocks)
                .map(|b| w_list[points.iter().filter(|&&p| p <= b).count()].clone())
                .collect();
            Ok(StyleSet { styles })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampling_is_reproducible_and_sized() {
        let cfg = GeneratorConfig::paper();
        let a = sample_latents(&mut ChaCha8Rng::seed_from_u64(3), &cfg);
        let b = sample_latents(&mut ChaCha8Rng::seed_from_u64(3), &cfg);
        assert_eq!(a, b);
        assert_eq!(a.0.concat().len(), 512);
        let sides: Vec<usize> = a.1.static_maps.iter().map(|m| m.side).collect();
        assert_eq!(sides, vec![4, 8, 16, 32, 64, 128, 256]);
        assert_eq!(a.1.dynamic_maps.len(), 7);
        a.1.validate(&cfg).unwrap();
    }

    #[test]
    fn unit_normal_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = normal_vec(&mut rng, 100_000);
        let mean = v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.02, "{mean} {var}");
    }

    #[test]
    fn broadcast_rules() {
        let a = vec![1.0f32; 4];
        let b = vec![2.0f32; 4];
        let single = broadcast_styles(&[a.clone()], &MixingRule::Single, 7).unwrap();
        assert!(single.styles.iter().all(|s| *s == a));
        let mixed = broadcast_styles(&[a.clone(), b.clone()], &MixingRule::Crossover(vec![4]), 7).unwrap();
        for (i, s) in mixed.styles.iter().enumerate() {
            assert_eq!(*s, if i < 3 { a.clone() } else { b.clone() });
        }
        assert!(matches!(broadcast_styles(&[], &MixingRule::Single, 7), Err(Error::Argument(_))));
        assert!(broadcast_styles(&[a.clone(), b], &MixingRule::Crossover(vec![1]), 7).is_err());
    }

    #[test]
    fn zero_mixing_probability_never_mixes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| MixingRule::sample(&mut rng, 0.0, 5) == MixingRule::Single));
    }

    #[test]
    fn wrong_noise_side_is_a_shape_error() {
        let cfg = GeneratorConfig::toy();
        let mut n = SpatialNoiseSet::zeros(&cfg);
        n.dynamic_maps[2] = NoiseMap::zeros(8);
        assert!(matches!(n.validate(&cfg), Err(Error::Shape(_))));
    }
}
