//! Weighted dense cross-entropy and the optimisation loop.

mod config;
mod loss;
mod trainer;

pub use config::{InitMode, TrainConfig};
pub use loss::{loss_weights, weighted_ce_loss, weighted_ce_with_grad, PROB_EPS};
pub use trainer::{snippet_frame_accuracy, train, EpochRecord, TrainLog};
