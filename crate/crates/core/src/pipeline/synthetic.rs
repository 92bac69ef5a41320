//! Procedural landscapes: gradient sky with drifting clouds over static hills,
//! optionally a lake mirroring the sky. Used as a stand-in corpus for toy
//! runs and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imaging::{Image, Mask};
use crate::training::{TrainingData, Video};

#[derive(Clone, Debug)]
struct Cloud {
    x: f64,
    y: f64,
    rx: f64,
    ry: f64,
    opacity: f64,
}

/// One procedural scene; `render(t)` animates clouds and light with `t`.
#[derive(Clone, Debug)]
pub struct Scene {
    horizon: f64,
    time_of_day: f64,
    light_drift: f64,
    wind: f64,
    hills: [(f64, f64, f64); 3],
    ground: [f64; 3],
    lake: Option<f64>,
    clouds: Vec<Cloud>,
    texture_seed: u64,
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn palette(tod: f64) -> ([f64; 3], [f64; 3], [f64; 3], f64) {
    let day = ([0.15, 0.4, 0.85], [0.7, 0.85, 0.97], [1.0, 1.0, 1.0], 1.0);
    let dusk = ([0.25, 0.18, 0.45], [0.97, 0.55, 0.3], [1.0, 0.75, 0.65], 0.7);
    let night = ([0.02, 0.03, 0.1], [0.12, 0.14, 0.3], [0.35, 0.35, 0.42], 0.3);
    let (a, b, t) = if tod < 0.5 { (day, dusk, tod * 2.0) } else { (dusk, night, tod * 2.0 - 1.0) };
    (
        lerp3(a.0, b.0, t),
        lerp3(a.1, b.1, t),
        lerp3(a.2, b.2, t),
        a.3 + (b.3 - a.3) * t,
    )
}

fn hash_noise(seed: u64, x: u64, y: u64) -> f64 {
    let mut h = seed ^ x.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ y.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

impl Scene {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let horizon = rng.random_range(0.45..0.65);
        let n_clouds = rng.random_range(3..7);
        let clouds = (0..n_clouds)
            .map(|_| Cloud {
                x: rng.random_range(0.0..1.0),
                y: rng.random_range(0.05..horizon * 0.8),
                rx: rng.random_range(0.08..0.22),
                ry: rng.random_range(0.03..0.08),
                opacity: rng.random_range(0.5..0.95),
            })
            .collect();
        let hills = [0, 1, 2].map(|i| {
            (
                rng.random_range(0.02..0.08) / (i as f64 + 1.0),
                rng.random_range(3.0..9.0) * (i as f64 + 1.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        });
        let g = rng.random_range(0.0..1.0);
        Self {
            horizon,
            time_of_day: rng.random_range(0.0..1.0),
            light_drift: rng.random_range(-0.15..0.15),
            wind: rng.random_range(0.15..0.4) * if rng.random::<bool>() { 1.0 } else { -1.0 },
            hills,
            ground: lerp3([0.25, 0.5, 0.2], [0.5, 0.4, 0.25], g),
            lake: rng.random::<bool>().then(|| rng.random_range(0.78..0.88)),
            clouds,
            texture_seed: rng.random(),
        }
    }

    fn hill_line(&self, u: f64) -> f64 {
        let bump: f64 = self
            .hills
            .iter()
            .map(|&(a, f, p)| a * (0.5 + 0.5 * (f * u + p).sin()))
            .sum();
        self.horizon - bump
    }

    fn sky(&self, u: f64, v: f64, t: f64) -> [f64; 3] {
        let tod = (self.time_of_day + self.light_drift * t).clamp(0.0, 1.0);
        let (zenith, horizon, cloud_col, _) = palette(tod);
        let mut c = lerp3(zenith, horizon, (v / self.horizon).clamp(0.0, 1.0));
        for cl in &self.clouds {
            let mut dx = (u - cl.x - self.wind * t).rem_euclid(1.0);
            if dx > 0.5 {
                dx -= 1.0;
            }
            let dy = v - cl.y;
            let a = cl.opacity * (-(dx / cl.rx).powi(2) - (dy / cl.ry).powi(2)).exp();
            c = lerp3(c, cloud_col, a);
        }
        c
    }

    fn is_ground(&self, u: f64, v: f64) -> bool {
        v >= self.hill_line(u) && self.lake.is_none_or(|l| v < l)
    }

    /// Frame at animation time `t` (0 for still images), `side` pixels square.
    pub fn render(&self, side: usize, t: f64) -> Image {
        let tod = (self.time_of_day + self.light_drift * t).clamp(0.0, 1.0);
        let light = palette(tod).3;
        Image::from_fn(side, side, |x, y| {
            let u = (x as f64 + 0.5) / side as f64;
            let v = (y as f64 + 0.5) / side as f64;
            let c = if self.is_ground(u, v) {
                let cell = 24.0;
                let n = hash_noise(self.texture_seed, (u * cell) as u64, (v * cell) as u64);
                let shade = 0.75 + 0.5 * n - 0.3 * (v - self.horizon);
                self.ground.map(|g| g * shade * light)
            } else if v >= self.hill_line(u) {
                let mirrored = 2.0 * self.horizon - v;
                self.sky(u, mirrored.max(0.0), t).map(|s| s * 0.8)
            } else {
                self.sky(u, v, t)
            };
            c.map(|ch| (ch.clamp(0.0, 1.0) * 2.0 - 1.0) as f32)
        })
    }

    /// Ground is static, sky and lake are dynamic.
    pub fn mask(&self, side: usize) -> Mask {
        Mask::from_fn(side, side, |x, y| {
            let u = (x as f64 + 0.5) / side as f64;
            let v = (y as f64 + 0.5) / side as f64;
            self.is_ground(u, v)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCorpus {
    pub image_side: usize,
    pub frame_side: usize,
    pub images: usize,
    pub videos: usize,
    pub frames_per_video: usize,
    pub seed: u64,
}

impl SyntheticCorpus {
    /// 64 stills at 32 px and 4 videos of 16 frames at 64 px.
    pub fn toy() -> Self {
        Self {
            image_side: 32,
            frame_side: 64,
            images: 64,
            videos: 4,
            frames_per_video: 16,
            seed: 0,
        }
    }

    pub fn build(&self) -> TrainingData {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let images = (0..self.images)
            .map(|_| Scene::random(&mut rng).render(self.image_side, 0.0))
            .collect();
        let videos = (0..self.videos)
            .map(|k| {
                let scene = Scene::random(&mut rng);
                let frames = (0..self.frames_per_video)
                    .map(|f| scene.render(self.frame_side, f as f64 / self.frames_per_video.max(2) as f64))
                    .collect();
                Video {
                    id: format!("synthetic-{k:03}"),
                    frames,
                }
            })
            .collect();
        TrainingData { images, videos }
    }
}
