//! Dataset generation, residual losses, Adam and the training loop.

mod adam;
mod config;
mod dataset;
mod evaluate;
pub mod gauge;
mod loss;
mod models;
mod train;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use config::{DatasetSpec, Preset, Regime, TrainConfig};
pub use dataset::generate_dataset;
pub use evaluate::{compare_tables, is_observable_column, reconstruction, reference_trajectory, Metrics, Table, ENTROPY_SLACK};
pub use loss::{loss, loss_and_grad, loss_so3, loss_thermal, LossModel};
pub use models::Models;
pub use train::{
    gradient_check, train, train_from, EpochRecord, GradCheck, TrainReport, TrainState, LEARN_BOTH_WARNING,
};
