//! Adversarial training with curriculum scenario sampling.

pub mod batch;
pub mod config;
pub mod loss;
pub mod run;
pub mod trainer;

pub use batch::{make_batch, make_batch_from_images, Batch};
pub use config::TrainConfig;
pub use run::{train, TrainOutcome};
pub use trainer::{load_generator, ScenarioValidation, StepStats, Trainer};
