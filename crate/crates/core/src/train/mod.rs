//! Optimizer, training loop with early stopping, evaluation and inference.

mod adam;
mod config;
mod eval;
mod run;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use config::{EarlyStopMetric, TrainConfig};
pub use eval::{evaluate, predict, Evaluation, ImagePrediction, PIXEL_THRESHOLD};
pub use run::{snapshot, restore, train, train_step, train_with, Clock, EpochRecord, NoClock, TrainingHistory};
