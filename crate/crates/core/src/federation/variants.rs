//! End-to-end training pipelines: the two-stage federated pipeline and the
//! centralized, autoencoder-free, partially federated and clustered variants.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::client::{Client, FrozenModel};
use super::config::{mix_seed, ArchitectureConfig, FederationConfig};
use super::coordinator::Coordinator;
use super::transport::{Direction, MessageLog, MessageRecord, PayloadKind};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::nn::WeightSnapshot;

/// Client id of the pooled client in centralized stages.
pub const CENTRAL_ID: &str = "central";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipelineMode {
    FullyFederated,
    FullyCentralized,
    FlNoAutoencoder,
    PartiallyFederated,
    /// Batteries randomly grouped into this many pooled clusters.
    BatchFederated(usize),
}

impl PipelineMode {
    pub fn uses_autoencoder(self) -> bool {
        !matches!(self, PipelineMode::FlNoAutoencoder)
    }

    /// Whether the mode declares raw-row pooling (and so carries no diode assertion).
    pub fn declares_pooling(self, n_train: usize) -> bool {
        match self {
            PipelineMode::FullyFederated | PipelineMode::FlNoAutoencoder => false,
            PipelineMode::FullyCentralized | PipelineMode::PartiallyFederated => true,
            PipelineMode::BatchFederated(k) => k < n_train,
        }
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineMode::FullyFederated => f.write_str("fully-federated"),
            PipelineMode::FullyCentralized => f.write_str("fully-centralized"),
            PipelineMode::FlNoAutoencoder => f.write_str("fl-no-autoencoder"),
            PipelineMode::PartiallyFederated => f.write_str("partially-federated"),
            PipelineMode::BatchFederated(k) => write!(f, "batch-federated-{k}"),
        }
    }
}

impl FromStr for PipelineMode {
    type Err = Error;

    /// Accepts `batch-federated-5`, `batch-federated(5)` and `batch-federated:5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "fully-federated" => PipelineMode::FullyFederated,
            "fully-centralized" => PipelineMode::FullyCentralized,
            "fl-no-autoencoder" => PipelineMode::FlNoAutoencoder,
            "partially-federated" => PipelineMode::PartiallyFederated,
            _ => {
                let k = s
                    .strip_prefix("batch-federated")
                    .map(|r| r.trim_start_matches(['-', ':', '(']).trim_end_matches(')'))
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))?;
                if k == 0 {
                    return Err(Error::Config("batch-federated needs at least one cluster".into()));
                }
                PipelineMode::BatchFederated(k)
            }
        })
    }
}

impl Serialize for PipelineMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PipelineMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-cycle predictions for one battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryPredictions {
    pub battery_id: String,
    pub t_f: u32,
    pub cycles: Vec<u32>,
    /// Raw network outputs in cycles; may be negative.
    pub predicted: Vec<f64>,
}

impl BatteryPredictions {
    /// Predictions clamped at zero, as used by replacement policies.
    pub fn clamped(&self) -> Vec<f64> {
        self.predicted.iter().map(|p| p.max(0.0)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub mode: PipelineMode,
    pub encoder: Option<FrozenModel>,
    pub decoder: Option<FrozenModel>,
    pub rul: FrozenModel,
    /// Global encoder/decoder weights before the first round.
    pub initial_autoencoder: Option<(WeightSnapshot, WeightSnapshot)>,
    pub log: MessageLog,
    /// `Some(true)` when the run declares no pooling and the log was audited clean.
    pub diode_asserted: Option<bool>,
    /// Client ids that took part in federated rounds, in id order.
    pub client_ids: Vec<String>,
    pub target_scale: f64,
}

impl TrainedPipeline {
    /// Predicts RUL for each battery, each normalized on its own rows.
    pub fn predict(&self, batteries: &[FeatureMatrix], run_seed: u64) -> Result<Vec<BatteryPredictions>> {
        batteries
            .iter()
            .map(|fm| {
                let client = Client::from_run_seed(fm, run_seed)?;
                Ok(BatteryPredictions {
                    battery_id: fm.battery_id.clone(),
                    t_f: fm.t_f,
                    cycles: fm.cycles.clone(),
                    predicted: client.predict(self.encoder.as_ref(), &self.rul, self.target_scale)?,
                })
            })
            .collect()
    }

    /// Confirms no frozen weights changed since their stage completed.
    pub fn verify_frozen(&self) -> Result<()> {
        self.rul.verify()?;
        for m in self.encoder.iter().chain(&self.decoder) {
            m.verify()?;
        }
        Ok(())
    }
}

/// Randomly partitions ids into `k` clusters: seeded shuffle, then
/// round-robin assignment. Each cluster's ids are sorted.
pub fn cluster_assignment(ids: &[String], k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if k == 0 || k > ids.len() {
        return Err(Error::Config(format!(
            "cannot form {k} clusters from {} training batteries",
            ids.len()
        )));
    }
    let mut order: Vec<String> = ids.to_vec();
    order.sort();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x434C_5553)));
    let mut clusters = vec![Vec::new(); k];
    for (i, id) in order.into_iter().enumerate() {
        clusters[i % k].push(id);
    }
    for c in &mut clusters {
        c.sort();
    }
    Ok(clusters)
}

fn pool(id: &str, members: &[Client], seed: u64, log: &mut MessageLog) -> Result<Client> {
    for m in members {
        log.record(MessageRecord {
            round: 0,
            stage: None,
            direction: Direction::Pooling,
            kind: PayloadKind::RawRows,
            peer: m.id().to_string(),
            bytes: m.raw_bytes(),
        });
    }
    Client::pooled(id, members, seed)
}

/// Trains one pipeline variant on the training batteries.
pub fn run_pipeline(
    mode: PipelineMode,
    train: &[FeatureMatrix],
    fed: &FederationConfig,
    arch: &ArchitectureConfig,
) -> Result<TrainedPipeline> {
    let first = train
        .first()
        .ok_or_else(|| Error::Config("no training batteries".into()))?;
    let d_in = first.features.cols();
    let mut individual = train
        .iter()
        .map(|fm| Client::from_run_seed(fm, fed.seed))
        .collect::<Result<Vec<_>>>()?;
    individual.sort_by(|a, b| a.id().cmp(b.id()));
    if let Some(c) = individual.iter().find(|c| c.input_dim() != d_in) {
        return Err(Error::Shape(format!(
            "client {} has {} features, expected {d_in}",
            c.id(),
            c.input_dim()
        )));
    }
    let mut pooling_log = MessageLog::new();

    // clients of the autoencoder stage and of the RUL stage
    let (ae_clients, mut rul_clients) = match mode {
        PipelineMode::FullyFederated | PipelineMode::FlNoAutoencoder => {
            (individual.clone(), individual)
        }
        PipelineMode::FullyCentralized => {
            let central = vec![pool(CENTRAL_ID, &individual, fed.seed, &mut pooling_log)?];
            (central.clone(), central)
        }
        PipelineMode::PartiallyFederated => {
            let central = vec![pool(CENTRAL_ID, &individual, fed.seed, &mut pooling_log)?];
            (central, individual)
        }
        PipelineMode::BatchFederated(k) => {
            let ids: Vec<String> = individual.iter().map(|c| c.id().to_string()).collect();
            let clusters = cluster_assignment(&ids, k, fed.seed)?;
            let mut clients = Vec::with_capacity(k);
            for (j, members) in clusters.iter().enumerate() {
                let member_clients: Vec<Client> = individual
                    .iter()
                    .filter(|c| members.iter().any(|m| m == c.id()))
                    .cloned()
                    .collect();
                if member_clients.len() == 1 {
                    clients.extend(member_clients);
                } else {
                    let id = format!("cluster-{j:03}");
                    clients.push(pool(&id, &member_clients, fed.seed, &mut pooling_log)?);
                }
            }
            clients.sort_by(|a, b| a.id().cmp(b.id()));
            (clients.clone(), clients)
        }
    };

    let mut coordinator = Coordinator::new(fed, arch, d_in, mode.uses_autoencoder())?;
    let initial_autoencoder = coordinator
        .autoencoder_globals()
        .map(|(e, d)| (e.clone(), d.clone()));
    let (encoder, decoder) = if mode.uses_autoencoder() {
        coordinator.set_clients_per_round(fed.clients_per_round.min(ae_clients.len()));
        let (e, d) = coordinator
            .run_autoencoder_stage(&ae_clients)
            .map_err(|e| e.in_stage("autoencoder stage"))?;
        (Some(e), Some(d))
    } else {
        (None, None)
    };
    coordinator.transform_clients(&mut rul_clients)?;
    coordinator.set_clients_per_round(fed.clients_per_round.min(rul_clients.len()));
    let rul = coordinator
        .run_rul_stage(&rul_clients)
        .map_err(|e| e.in_stage("RUL stage"))?;
    let mut full_log = pooling_log;
    for r in coordinator.into_log().records() {
        full_log.record(r.clone());
    }

    let diode_asserted = if mode.declares_pooling(train.len()) {
        None
    } else {
        full_log.assert_diode()?;
        Some(true)
    };
    let mut client_ids: Vec<String> = rul_clients.iter().map(|c| c.id().to_string()).collect();
    client_ids.sort();
    let trained = TrainedPipeline {
        mode,
        encoder,
        decoder,
        rul,
        initial_autoencoder,
        log: full_log,
        diode_asserted,
        client_ids,
        target_scale: arch.target_scale,
    };
    trained.verify_frozen()?;
    Ok(trained)
}
