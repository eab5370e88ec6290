//! Mini-batch training loops shared by local clients and centralized baselines.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::loss::{mse, mse_loss};
use super::matrix::Matrix;
use super::network::DenseNetwork;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 32,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        self.adam.validate()
    }
}

/// Shuffled mini-batches of row indices for one epoch.
fn epoch_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Trains `net` on `(inputs, targets)` with a fresh Adam state.
/// Returns the mean batch loss of the last epoch (0 when `epochs == 0`).
pub fn train_regression<R: Rng + ?Sized>(
    net: &mut DenseNetwork,
    inputs: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    if inputs.rows() != targets.rows() {
        return Err(Error::Shape(format!(
            "{} input rows vs {} target rows",
            inputs.rows(),
            targets.rows()
        )));
    }
    let mut adam = AdamState::new(net.param_count(), cfg.adam)?;
    let mut last = 0.0;
    for _ in 0..cfg.epochs {
        let batches = epoch_batches(inputs.rows(), cfg.batch_size, rng);
        let mut total = 0.0;
        for idx in &batches {
            let x = inputs.select_rows(idx);
            let y = targets.select_rows(idx);
            let cache = net.forward_cached(&x)?;
            let (loss, grad) = mse_loss(cache.output(), &y)?;
            let g = net.backward(&cache, &grad)?;
            adam.step(net.params_mut(), &g.params)?;
            total += loss;
        }
        last = total / batches.len().max(1) as f64;
        if !last.is_finite() {
            return Err(Error::Numeric(format!("training loss diverged to {last}")));
        }
    }
    Ok(last)
}

/// Trains encoder and decoder jointly to reconstruct `inputs`.
/// Returns the mean batch reconstruction loss of the last epoch.
pub fn train_autoencoder<R: Rng + ?Sized>(
    encoder: &mut DenseNetwork,
    decoder: &mut DenseNetwork,
    inputs: &Matrix,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    if encoder.output_dim() != decoder.input_dim() || decoder.output_dim() != encoder.input_dim() {
        return Err(Error::Shape(format!(
            "encoder {:?} and decoder {:?} do not compose into an autoencoder",
            encoder.layer_dims(),
            decoder.layer_dims()
        )));
    }
    let mut adam_enc = AdamState::new(encoder.param_count(), cfg.adam)?;
    let mut adam_dec = AdamState::new(decoder.param_count(), cfg.adam)?;
    let mut last = 0.0;
    for _ in 0..cfg.epochs {
        let batches = epoch_batches(inputs.rows(), cfg.batch_size, rng);
        let mut total = 0.0;
        for idx in &batches {
            let x = inputs.select_rows(idx);
            let enc_cache = encoder.forward_cached(&x)?;
            let dec_cache = decoder.forward_cached(enc_cache.output())?;
            let (loss, grad) = mse_loss(dec_cache.output(), &x)?;
            let g_dec = decoder.backward(&dec_cache, &grad)?;
            let g_enc = encoder.backward(&enc_cache, &g_dec.input)?;
            adam_dec.step(decoder.params_mut(), &g_dec.params)?;
            adam_enc.step(encoder.params_mut(), &g_enc.params)?;
            total += loss;
        }
        last = total / batches.len().max(1) as f64;
        if !last.is_finite() {
            return Err(Error::Numeric(format!("reconstruction loss diverged to {last}")));
        }
    }
    Ok(last)
}

/// Reconstruction MSE of `inputs` through encoder then decoder.
pub fn reconstruction_mse(
    encoder: &DenseNetwork,
    decoder: &DenseNetwork,
    inputs: &Matrix,
) -> Result<f64> {
    let code = encoder.predict(inputs)?;
    let recon = decoder.predict(&code)?;
    mse(&recon, inputs)
}
