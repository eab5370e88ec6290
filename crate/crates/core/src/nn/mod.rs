//! Minimal dense feed-forward network engine: batched forward and backward
//! passes, mean squared error, Adam, and flat weight snapshots.

mod adam;
mod loss;
mod matrix;
mod network;
mod snapshot;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use loss::{mse, mse_loss};
pub use matrix::Matrix;
pub use network::{Activation, DenseNetwork, ForwardCache, Gradients, LayerView};
pub use snapshot::WeightSnapshot;
pub use train::{reconstruction_mse, train_autoencoder, train_regression, TrainConfig};
