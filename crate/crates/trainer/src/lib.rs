//! Training loop, checkpoints and inference for the SAR-to-optical models.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod infer;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{OptimizerConfig, TrainConfig};
pub use data::{load_samples, Sample};
pub use error::{Error, Result};
pub use infer::{infer, infer_tile};
pub use train::{evaluate_samples, train, Checkpoint, LossTrace, StepRecord, Trainer};
