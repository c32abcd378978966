//! The autoencoder, its objective, training loop and checkpoint format.

pub mod checkpoint;
mod config;
mod loss;
mod network;
mod objective;
mod train;

pub use config::{ModelConfig, UpdateMode};
pub use loss::{
    loss_ae, loss_physics, loss_total, loss_total_with_grad, mean_squared_error, physics_losses, reconstruction_loss,
    LossBreakdown,
};
pub use network::{ForwardPass, PiConvAe};
pub use objective::FrozenObjective;
pub use train::{evaluate_loss, train, train_with, EpochRecord, StopReason, TrainReport};
