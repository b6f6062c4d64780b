//! Adam, the staged training schedule and batch sampling.

pub mod adam;
pub mod plan;
pub mod sampler;
pub mod trainer;

pub use adam::{adam_step, AdamState};
pub use plan::{EpochRecord, Phase, TrainPlan};
pub use sampler::{sample_batch, Batch, SampleOptions};
pub use trainer::{train, train_on_images, TrainOutcome};
