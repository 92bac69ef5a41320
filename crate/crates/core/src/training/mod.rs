//! Progressive adversarial training with a static critic on single images
//! and a pairwise critic on frame pairs.

mod loss;
mod pairs;
mod schedule;
mod trainer;

pub use loss::{discriminator_loss, generator_loss, r1_penalty, r1_surrogate, R1Output};
pub use pairs::{
    render_fake_pair, sample_crop_pair, sample_fake_pair, sample_real_pair, FakePairLatents, FramePair, PairOrigin,
    PairSource, Video,
};
pub use schedule::{BalancingMode, PhaseKind, PhaseState, ResolutionSetting, TrainingSchedule};
pub use trainer::{fake_pair_inputs, Branch, FakeInputs, MetricsLog, StepMetrics, Trainer, TrainingConfig, TrainingData};
