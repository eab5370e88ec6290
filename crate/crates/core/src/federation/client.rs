//! Simulated clients. A client owns its feature rows, normalization and
//! compressed representation; the only things it hands back to the
//! coordinator are serialized weight snapshots.

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{client_seed, round_seed};
use super::transport::{ModelUpdate, RoundConfig, Stage};
use crate::data::{normalize, FeatureMatrix, NormalizationParams};
use crate::error::{Error, Result};
use crate::nn::{
    reconstruction_mse, train_autoencoder, train_regression, DenseNetwork, Matrix, WeightSnapshot,
};

/// A stage's final weights. Frozen models are immutable; the checksum taken
/// at freeze time lets a run verify nothing touched them afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenModel {
    snapshot: WeightSnapshot,
    checksum: u64,
}

impl FrozenModel {
    pub fn freeze(snapshot: WeightSnapshot) -> Self {
        let checksum = snapshot.checksum();
        Self { snapshot, checksum }
    }

    pub fn snapshot(&self) -> &WeightSnapshot {
        &self.snapshot
    }

    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    pub fn verify(&self) -> Result<()> {
        if self.snapshot.checksum() == self.checksum {
            Ok(())
        } else {
            Err(Error::Contract("frozen weights changed after their stage completed".into()))
        }
    }

    pub fn network(&self) -> Result<DenseNetwork> {
        network_from_snapshot(&self.snapshot)
    }
}

/// Rebuilds a relu-hidden, linear-output network from a snapshot's block list.
pub fn network_from_snapshot(snapshot: &WeightSnapshot) -> Result<DenseNetwork> {
    let spec = snapshot.shape_spec();
    if spec.is_empty() || !spec.len().is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "{} parameter blocks cannot describe dense layers",
            spec.len()
        )));
    }
    let mut dims = vec![spec[0].1];
    for pair in spec.chunks(2) {
        let ((out, inp), bias) = (pair[0], pair[1]);
        if inp != *dims.last().expect("non-empty") || bias != (out, 1) {
            return Err(Error::Shape(format!("inconsistent block list {spec:?}")));
        }
        dims.push(out);
    }
    let mut net = DenseNetwork::regression_zeros(&dims)?;
    net.restore(snapshot)?;
    Ok(net)
}

/// Row indices for one local round: all rows in order when the sample
/// covers the whole set, otherwise `ceil(ratio * n)` rows drawn without
/// replacement.
pub fn sample_rows(n: usize, ratio: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = ((ratio * n as f64).ceil() as usize).clamp(1, n.max(1));
    if m >= n {
        (0..n).collect()
    } else {
        rand::seq::index::sample(rng, n, m).into_vec()
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    id: String,
    seed: u64,
    members: Vec<String>,
    inputs: Matrix,
    targets: Vec<f64>,
    cycles: Vec<u32>,
    normalization: Vec<NormalizationParams>,
    compressed: Option<Matrix>,
}

impl Client {
    /// A single-battery client whose features are normalized on its own rows.
    pub fn new(features: &FeatureMatrix, seed: u64) -> Result<Self> {
        let (inputs, params) = normalize(&features.features, None)?;
        Ok(Self {
            id: features.battery_id.clone(),
            seed,
            members: vec![features.battery_id.clone()],
            inputs,
            targets: features.targets.clone(),
            cycles: features.cycles.clone(),
            normalization: vec![params],
            compressed: None,
        })
    }

    /// A single-battery client seeded from the run seed and its id.
    pub fn from_run_seed(features: &FeatureMatrix, run_seed: u64) -> Result<Self> {
        Self::new(features, client_seed(run_seed, &features.battery_id))
    }

    /// A client holding the concatenated, individually normalized rows of
    /// `members`. Building one moves raw rows, which callers must log.
    pub fn pooled(id: &str, members: &[Client], run_seed: u64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config(format!("pooled client `{id}` has no members")));
        }
        let inputs = Matrix::vstack(members.iter().map(|c| &c.inputs))?;
        Ok(Self {
            id: id.to_string(),
            seed: client_seed(run_seed, id),
            members: members.iter().flat_map(|c| c.members.iter().cloned()).collect(),
            inputs,
            targets: members.iter().flat_map(|c| c.targets.iter().copied()).collect(),
            cycles: members.iter().flat_map(|c| c.cycles.iter().copied()).collect(),
            normalization: members.iter().flat_map(|c| c.normalization.iter().cloned()).collect(),
            compressed: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Battery ids whose rows this client holds.
    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn rows(&self) -> usize {
        self.inputs.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn normalization(&self) -> &[NormalizationParams] {
        &self.normalization
    }

    /// Size in bytes of the rows this client would hand over if pooled.
    pub fn raw_bytes(&self) -> usize {
        self.rows() * (self.input_dim() + 1) * std::mem::size_of::<f64>()
    }

    pub fn compressed_dim(&self) -> Option<usize> {
        self.compressed.as_ref().map(Matrix::cols)
    }

    /// Replaces the stage-2 inputs with the frozen encoder's output, or with
    /// the normalized features themselves when no encoder is used.
    pub fn transform_local(&mut self, encoder: Option<&FrozenModel>) -> Result<()> {
        let compressed = match encoder {
            Some(enc) => {
                enc.verify()?;
                enc.network()?.predict(&self.inputs)?
            }
            None => self.inputs.clone(),
        };
        self.compressed = Some(compressed);
        Ok(())
    }

    fn round_rng(&self, stage: Stage, round: u32) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(round_seed(self.seed, stage, round))
    }

    /// Handles one round: decodes the broadcast and config, trains locally
    /// and returns the encoded update, or `None` if there is nothing to train on.
    pub fn local_round(&self, broadcast: &[u8], config: &[u8]) -> Result<Option<Vec<u8>>> {
        let cfg = RoundConfig::decode(config)?;
        let global = ModelUpdate::decode(broadcast)?;
        if global.stage != cfg.stage {
            return Err(Error::Contract(format!(
                "weights for the {} stage sent with a {} config",
                global.stage, cfg.stage
            )));
        }
        if self.rows() == 0 {
            info!("client {} has no training rows; skipping round {}", self.id, cfg.round);
            return Ok(None);
        }
        let update = match cfg.stage {
            Stage::Autoencoder => self.local_autoencoder_round(&global.snapshots, &cfg)?,
            Stage::Rul => self.local_rul_round(&global.snapshots, &cfg)?,
        };
        Ok(Some(update.encode()))
    }

    pub fn local_autoencoder_round(
        &self,
        globals: &[WeightSnapshot],
        cfg: &RoundConfig,
    ) -> Result<ModelUpdate> {
        let [enc, dec] = globals else {
            return Err(Error::Contract(format!(
                "autoencoder round expects 2 snapshots, got {}",
                globals.len()
            )));
        };
        let mut encoder = network_from_snapshot(enc)?;
        let mut decoder = network_from_snapshot(dec)?;
        let mut rng = self.round_rng(Stage::Autoencoder, cfg.round);
        let idx = sample_rows(self.rows(), cfg.data_ratio, &mut rng);
        let batch = self.inputs.select_rows(&idx);
        train_autoencoder(&mut encoder, &mut decoder, &batch, &cfg.train, &mut rng)?;
        Ok(ModelUpdate {
            client_id: self.id.clone(),
            stage: Stage::Autoencoder,
            snapshots: vec![encoder.snapshot(), decoder.snapshot()],
            sample_count: idx.len() as u64,
        })
    }

    pub fn local_rul_round(
        &self,
        globals: &[WeightSnapshot],
        cfg: &RoundConfig,
    ) -> Result<ModelUpdate> {
        let [rul] = globals else {
            return Err(Error::Contract(format!(
                "RUL round expects 1 snapshot, got {}",
                globals.len()
            )));
        };
        let compressed = self.compressed.as_ref().ok_or_else(|| {
            Error::Contract(format!("client {} has not transformed its features", self.id))
        })?;
        let mut net = network_from_snapshot(rul)?;
        let mut rng = self.round_rng(Stage::Rul, cfg.round);
        let idx = sample_rows(self.rows(), cfg.data_ratio, &mut rng);
        let x = compressed.select_rows(&idx);
        let y = Matrix::column(&idx.iter().map(|&i| self.targets[i] / cfg.target_scale).collect::<Vec<_>>());
        train_regression(&mut net, &x, &y, &cfg.train, &mut rng)?;
        Ok(ModelUpdate {
            client_id: self.id.clone(),
            stage: Stage::Rul,
            snapshots: vec![net.snapshot()],
            sample_count: idx.len() as u64,
        })
    }

    /// Raw (unclamped) RUL predictions in cycles, one per row.
    pub fn predict(&self, encoder: Option<&FrozenModel>, rul: &FrozenModel, target_scale: f64) -> Result<Vec<f64>> {
        rul.verify()?;
        let inputs = match encoder {
            Some(enc) => {
                enc.verify()?;
                enc.network()?.predict(&self.inputs)?
            }
            None => self.inputs.clone(),
        };
        let out = rul.network()?.predict(&inputs)?;
        Ok(out.into_vec().into_iter().map(|p| p * target_scale).collect())
    }

    /// Reconstruction error of the client's rows; a scalar metric only.
    pub fn reconstruction_mse(&self, encoder: &WeightSnapshot, decoder: &WeightSnapshot) -> Result<f64> {
        let enc = network_from_snapshot(encoder)?;
        let dec = network_from_snapshot(decoder)?;
        reconstruction_mse(&enc, &dec, &self.inputs)
    }

    /// Cycle index of each row. Evaluation harness access only.
    pub fn cycles(&self) -> &[u32] {
        &self.cycles
    }

    /// Ground-truth RUL of each row. Evaluation harness access only.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Normalized inputs. Evaluation harness access only.
    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    /// Stage-2 inputs, once `transform_local` has run. Evaluation harness access only.
    pub fn compressed(&self) -> Option<&Matrix> {
        self.compressed.as_ref()
    }
}
