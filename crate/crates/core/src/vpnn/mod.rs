//! Velocity-prediction network: a small TCN with exact gradients and Adam.

pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod network;
pub mod train;
pub mod weight_norm;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use conv::{dilated_causal_conv, ConvDims};
pub use network::{Activations, DropoutKey, Mode, Network, NetworkConfig, TensorInfo, LOSS_EPS};
pub use train::{train, train_from, write_loss_history, LossRecord, TrainingConfig, TrainingOutcome};
pub use weight_norm::weight_norm_effective;
