use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How often pairwise (video) steps are taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BalancingMode {
    /// Linear anneal from `start` to `end` over every transition phase, `end` afterwards.
    Decay { start: f64, end: f64 },
    /// Constant proportion.
    Fixed { proportion: f64 },
}

impl Default for BalancingMode {
    fn default() -> Self {
        BalancingMode::Decay { start: 0.5, end: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSetting {
    pub resolution: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    /// New block fading in (at the first resolution: nothing to fade, only the
    /// balancing anneal runs).
    Transition,
    Stabilization,
}

/// Position in the progressive schedule for a given sample count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseState {
    pub index: usize,
    pub block: usize,
    pub kind: PhaseKind,
    /// Fraction of the phase already consumed, in `[0, 1)`; stays 0 in the
    /// open-ended final phase.
    pub progress: f64,
    pub alpha: f32,
}

/// Progressive-growing schedule measured in training samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSchedule {
    pub transition_samples: u64,
    pub stabilization_samples: u64,
    pub resolutions: Vec<ResolutionSetting>,
    pub balancing: BalancingMode,
    pub crop_pair_probability: f64,
}

impl TrainingSchedule {
    /// Published schedule: 600k-sample phases and the per-resolution batch and
    /// learning-rate tables.
    pub fn paper() -> Self {
        let table = [
            (4, 512, 1e-3),
            (8, 256, 1e-3),
            (16, 128, 1e-3),
            (32, 64, 1e-3),
            (64, 32, 1e-3),
            (128, 32, 1.5e-3),
            (256, 16, 2e-3),
            (512, 8, 3e-3),
            (1024, 8, 3e-3),
        ];
        Self {
            transition_samples: 600_000,
            stabilization_samples: 600_000,
            resolutions: table
                .iter()
                .map(|&(resolution, batch_size, learning_rate)| ResolutionSetting {
                    resolution,
                    batch_size,
                    learning_rate,
                })
                .collect(),
            balancing: BalancingMode::default(),
            crop_pair_probability: 0.5,
        }
    }

    /// Phases shortened 100x and batches divided by 8 (at least 4).
    pub fn toy() -> Self {
        let mut s = Self::paper();
        s.transition_samples /= 100;
        s.stabilization_samples /= 100;
        for r in &mut s.resolutions {
            r.batch_size = (r.batch_size / 8).max(4);
        }
        s
    }

    pub fn validate(&self, num_blocks: usize) -> Result<()> {
        if self.transition_samples == 0 {
            return Err(Error::Config("transition_samples must be positive".into()));
        }
        for n in 1..=num_blocks {
            self.setting(1 << (n + 1))?;
        }
        if self.resolutions.iter().any(|r| r.batch_size == 0 || !(r.learning_rate > 0.0)) {
            return Err(Error::Config("batch sizes and learning rates must be positive".into()));
        }
        let p = |v: f64| (0.0..=1.0).contains(&v);
        let ok = match self.balancing {
            BalancingMode::Decay { start, end } => p(start) && p(end),
            BalancingMode::Fixed { proportion } => p(proportion),
        };
        if !ok || !p(self.crop_pair_probability) {
            return Err(Error::Config("proportions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn setting(&self, resolution: usize) -> Result<&ResolutionSetting> {
        self.resolutions
            .iter()
            .find(|r| r.resolution == resolution)
            .ok_or_else(|| Error::Config(format!("no batch/lr entry for {resolution} px")))
    }

    fn phase_lengths(&self, num_blocks: usize) -> Vec<(usize, PhaseKind, u64)> {
        let mut phases = vec![(1, PhaseKind::Transition, self.transition_samples)];
        for b in 2..=num_blocks {
            phases.push((b, PhaseKind::Transition, self.transition_samples));
            phases.push((b, PhaseKind::Stabilization, self.stabilization_samples));
        }
        phases
    }

    /// Samples needed to finish every fade-in and stabilization.
    pub fn samples_to_final(&self, num_blocks: usize) -> u64 {
        self.phase_lengths(num_blocks).iter().map(|p| p.2).sum()
    }

    pub fn phase_at(&self, samples: u64, num_blocks: usize) -> PhaseState {
        let mut start = 0;
        for (index, (block, kind, len)) in self.phase_lengths(num_blocks).into_iter().enumerate() {
            if samples < start + len {
                let progress = (samples - start) as f64 / len as f64;
                let alpha = if kind == PhaseKind::Transition && block > 1 {
                    progress as f32
                } else {
                    1.0
                };
                return PhaseState {
                    index,
                    block,
                    kind,
                    progress,
                    alpha,
                };
            }
            start += len;
        }
        PhaseState {
            index: 2 * num_blocks - 1,
            block: num_blocks,
            kind: PhaseKind::Stabilization,
            progress: 0.0,
            alpha: 1.0,
        }
    }

    pub fn pairwise_proportion(&self, samples: u64, num_blocks: usize) -> f64 {
        match self.balancing {
            BalancingMode::Fixed { proportion } => proportion,
            BalancingMode::Decay { start, end } => {
                let ph = self.phase_at(samples, num_blocks);
                match ph.kind {
                    PhaseKind::Transition => start + (end - start) * ph.progress,
                    PhaseKind::Stabilization => end,
                }
            }
        }
    }
}
