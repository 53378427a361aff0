//! Losses, optimizers, the joint / alternating / post-input schedules, early
//! stopping and the resumable checkpoint archive.

mod checkpoint;
mod loss;
mod optimizer;
mod plan;
mod trainer;

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_load, checkpoint_save, checkpoint_to_bytes, config_hash, read_manifest,
    Manifest, TensorEntry, FORMAT_VERSION,
};
pub use loss::{loss_bce, loss_mse, LossKind, BCE_EPSILON};
pub use optimizer::{optimizer_step, OptimizerConfig, OptimizerKind, OptimizerState};
pub use plan::{Phase, Schedule, Stage, TrainPlan};
pub use trainer::{
    history_csv, mean_squared_error, train, train_alternating, train_joint, train_post_input, BestPoint,
    EpochRecord, GuardPoint, Snapshot, TrainData, TrainOutcome, TrainState, Trainer, HISTORY_COLUMNS,
    HISTORY_SCHEMA_VERSION,
};

#[cfg(test)]
mod tests;
