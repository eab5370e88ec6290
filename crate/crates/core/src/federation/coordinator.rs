//! The coordinator: client sampling, broadcast, synchronous FedAvg and
//! stage freezing.

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::client::{Client, FrozenModel};
use super::config::{init_seed, sampler_seed, ArchitectureConfig, FederationConfig};
use super::transport::{
    Direction, MessageLog, MessageRecord, ModelUpdate, PayloadKind, RoundConfig, Stage,
};
use crate::error::{Error, Result};
use crate::nn::{DenseNetwork, WeightSnapshot};

/// Unweighted elementwise mean of the updates' snapshots.
///
/// Updates are ordered by `client_id` before summing so the floating-point
/// result does not depend on arrival order.
pub fn fed_avg(updates: &[ModelUpdate]) -> Result<Vec<WeightSnapshot>> {
    let first = updates
        .first()
        .ok_or_else(|| Error::Contract("fed_avg needs at least one update".into()))?;
    for u in updates {
        if u.stage != first.stage {
            return Err(Error::Contract(format!(
                "mixed stages in one aggregation: {} and {}",
                first.stage, u.stage
            )));
        }
        if u.snapshots.len() != first.snapshots.len()
            || u.snapshots
                .iter()
                .zip(&first.snapshots)
                .any(|(a, b)| a.shape_spec() != b.shape_spec())
        {
            return Err(Error::Contract(format!(
                "update from `{}` does not match the shapes of `{}`",
                u.client_id, first.client_id
            )));
        }
    }
    let mut ordered: Vec<&ModelUpdate> = updates.iter().collect();
    ordered.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    let k = ordered.len() as f64;
    (0..first.snapshots.len())
        .map(|s| {
            let mut sum = ordered[0].snapshots[s].values().to_vec();
            for u in &ordered[1..] {
                for (acc, v) in sum.iter_mut().zip(u.snapshots[s].values()) {
                    *acc += v;
                }
            }
            for v in &mut sum {
                *v /= k;
            }
            WeightSnapshot::new(sum, first.snapshots[s].shape_spec().to_vec())
        })
        .collect()
}

#[derive(Debug)]
pub struct Coordinator {
    config: FederationConfig,
    target_scale: f64,
    sampler: ChaCha8Rng,
    encoder: Option<WeightSnapshot>,
    decoder: Option<WeightSnapshot>,
    rul: WeightSnapshot,
    frozen_autoencoder: Option<(FrozenModel, FrozenModel)>,
    frozen_rul: Option<FrozenModel>,
    log: MessageLog,
    rounds_run: Vec<(Stage, u32)>,
}

impl Coordinator {
    /// Initializes global weights. With `use_autoencoder` the RUL network
    /// reads the bottleneck; otherwise it reads the `feature_dim` raw features.
    pub fn new(
        config: &FederationConfig,
        arch: &ArchitectureConfig,
        feature_dim: usize,
        use_autoencoder: bool,
    ) -> Result<Self> {
        config.validate()?;
        arch.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(init_seed(config.seed));
        let (encoder, decoder, rul_in) = if use_autoencoder {
            let enc = DenseNetwork::regression(&arch.encoder_dims(feature_dim), &mut init)?;
            let dec = DenseNetwork::regression(&arch.decoder_dims(feature_dim), &mut init)?;
            (Some(enc.snapshot()), Some(dec.snapshot()), arch.bottleneck)
        } else {
            (None, None, feature_dim)
        };
        let rul = DenseNetwork::regression(&arch.rul_dims(rul_in), &mut init)?.snapshot();
        Ok(Self {
            config: config.clone(),
            target_scale: arch.target_scale,
            sampler: ChaCha8Rng::seed_from_u64(sampler_seed(config.seed)),
            encoder,
            decoder,
            rul,
            frozen_autoencoder: None,
            frozen_rul: None,
            log: MessageLog::new(),
            rounds_run: Vec::new(),
        })
    }

    /// Changes the per-round client sample size for the stages still to run.
    pub fn set_clients_per_round(&mut self, s: usize) {
        self.config.clients_per_round = s.max(1);
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    pub fn log(&self) -> &MessageLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut MessageLog {
        &mut self.log
    }

    pub fn into_log(self) -> MessageLog {
        self.log
    }

    /// Rounds completed so far, in order.
    pub fn rounds_run(&self) -> &[(Stage, u32)] {
        &self.rounds_run
    }

    /// Current global encoder and decoder weights, if the run uses them.
    pub fn autoencoder_globals(&self) -> Option<(&WeightSnapshot, &WeightSnapshot)> {
        self.encoder.as_ref().zip(self.decoder.as_ref())
    }

    pub fn rul_global(&self) -> &WeightSnapshot {
        &self.rul
    }

    pub fn frozen_autoencoder(&self) -> Option<&(FrozenModel, FrozenModel)> {
        self.frozen_autoencoder.as_ref()
    }

    pub fn frozen_rul(&self) -> Option<&FrozenModel> {
        self.frozen_rul.as_ref()
    }

    /// Uniformly samples clients without replacement, returned in client_id order.
    fn sample_clients(&mut self, clients: &[Client]) -> Vec<usize> {
        let n = clients.len();
        let s = self.config.clients_per_round;
        let mut chosen = if s >= n {
            if s > n {
                warn!("clients_per_round {s} exceeds {n} clients; using all clients");
            }
            // still draw so the sampler stream does not depend on the clamp
            rand::seq::index::sample(&mut self.sampler, n, n).into_vec()
        } else {
            rand::seq::index::sample(&mut self.sampler, n, s).into_vec()
        };
        chosen.sort_by(|&a, &b| clients[a].id().cmp(clients[b].id()));
        chosen
    }

    fn record(&mut self, round: u32, stage: Stage, direction: Direction, kind: PayloadKind, peer: &str, bytes: usize) {
        self.log.record(MessageRecord {
            round,
            stage: Some(stage),
            direction,
            kind,
            peer: peer.to_string(),
            bytes,
        });
    }

    fn run_round(
        &mut self,
        stage: Stage,
        round: u32,
        globals: Vec<WeightSnapshot>,
        clients: &[Client],
    ) -> Result<Vec<WeightSnapshot>> {
        let selected = self.sample_clients(clients);
        let config = RoundConfig {
            stage,
            round,
            data_ratio: self.config.data_ratio,
            target_scale: match stage {
                Stage::Autoencoder => 1.0,
                Stage::Rul => self.target_scale,
            },
            train: self.config.train_config(),
        }
        .encode();
        let mut broadcasts = Vec::with_capacity(selected.len());
        for &i in &selected {
            let id = clients[i].id();
            let payload = ModelUpdate {
                client_id: id.to_string(),
                stage,
                snapshots: globals.clone(),
                sample_count: 0,
            }
            .encode();
            self.record(round, stage, Direction::CoordinatorToClient, PayloadKind::Config, id, config.len());
            self.record(round, stage, Direction::CoordinatorToClient, PayloadKind::Weights, id, payload.len());
            broadcasts.push(payload);
        }
        let replies: Vec<Result<Option<Vec<u8>>>> = selected
            .par_iter()
            .zip(broadcasts.par_iter())
            .map(|(&i, b)| clients[i].local_round(b, &config))
            .collect();
        let mut updates = Vec::with_capacity(selected.len());
        for (&i, reply) in selected.iter().zip(replies) {
            let id = clients[i].id();
            if let Some(bytes) = reply.map_err(|e| e.in_stage(format!("{stage} round {round}, client {id}")))? {
                self.record(round, stage, Direction::ClientToCoordinator, PayloadKind::Weights, id, bytes.len());
                let update = ModelUpdate::decode(&bytes)?;
                if update.client_id != id || update.stage != stage {
                    return Err(Error::Contract(format!(
                        "client {id} answered as `{}` for the {} stage",
                        update.client_id, update.stage
                    )));
                }
                updates.push(update);
            }
        }
        self.rounds_run.push((stage, round));
        if updates.is_empty() {
            warn!("{stage} round {round}: no client returned an update; keeping globals");
            return Ok(globals);
        }
        debug!("{stage} round {round}: averaging {} updates", updates.len());
        fed_avg(&updates)
    }

    fn require_clients(clients: &[Client]) -> Result<()> {
        if clients.is_empty() {
            Err(Error::Config("federated training needs at least one training client".into()))
        } else {
            Ok(())
        }
    }

    /// Runs every autoencoder round and freezes the resulting weights.
    pub fn run_autoencoder_stage(&mut self, clients: &[Client]) -> Result<(FrozenModel, FrozenModel)> {
        Self::require_clients(clients)?;
        if self.frozen_autoencoder.is_some() {
            return Err(Error::Contract("the autoencoder stage is already frozen".into()));
        }
        let (mut enc, mut dec) = match (self.encoder.take(), self.decoder.take()) {
            (Some(e), Some(d)) => (e, d),
            _ => return Err(Error::Contract("this run was configured without an autoencoder".into())),
        };
        for round in 0..self.config.rounds_autoencoder {
            let mut out = self.run_round(Stage::Autoencoder, round, vec![enc, dec], clients)?;
            dec = out.pop().expect("two snapshots");
            enc = out.pop().expect("two snapshots");
        }
        self.encoder = Some(enc.clone());
        self.decoder = Some(dec.clone());
        let frozen = (FrozenModel::freeze(enc), FrozenModel::freeze(dec));
        self.frozen_autoencoder = Some(frozen.clone());
        Ok(frozen)
    }

    /// Applies the frozen encoder on every client, locally.
    pub fn transform_clients(&self, clients: &mut [Client]) -> Result<()> {
        match (&self.encoder, &self.frozen_autoencoder) {
            (None, _) => clients.iter_mut().try_for_each(|c| c.transform_local(None)),
            (Some(_), Some((enc, _))) => clients.iter_mut().try_for_each(|c| c.transform_local(Some(enc))),
            (Some(_), None) => Err(Error::Contract(
                "transform_local requires the autoencoder stage to be frozen".into(),
            )),
        }
    }

    /// Runs every RUL round and freezes the resulting weights.
    pub fn run_rul_stage(&mut self, clients: &[Client]) -> Result<FrozenModel> {
        Self::require_clients(clients)?;
        if self.frozen_rul.is_some() {
            return Err(Error::Contract("the RUL stage is already frozen".into()));
        }
        if self.encoder.is_some() && self.frozen_autoencoder.is_none() {
            return Err(Error::Contract("the RUL stage needs a frozen autoencoder".into()));
        }
        let mut rul = self.rul.clone();
        for round in 0..self.config.rounds_rul {
            rul = self
                .run_round(Stage::Rul, round, vec![rul], clients)?
                .pop()
                .expect("one snapshot");
        }
        self.rul = rul.clone();
        let frozen = FrozenModel::freeze(rul);
        self.frozen_rul = Some(frozen.clone());
        Ok(frozen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn update(id: &str, values: Vec<f64>) -> ModelUpdate {
        let n = values.len();
        ModelUpdate {
            client_id: id.into(),
            stage: Stage::Rul,
            snapshots: vec![WeightSnapshot::new(values, vec![(n, 1)]).unwrap()],
            sample_count: 1,
        }
    }

    #[test]
    fn mean_of_two() {
        let out = fed_avg(&[update("a", vec![1.0, 3.0]), update("b", vec![3.0, 5.0])]).unwrap();
        assert_eq!(out[0].values(), &[2.0, 4.0]);
    }

    #[test]
    fn single_update_is_identity() {
        let v = vec![0.1, -0.0, 1e-310, 7.25];
        let out = fed_avg(&[update("a", v.clone())]).unwrap();
        assert_eq!(
            out[0].values().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_mixed_stage_and_shape() {
        let mut other = update("b", vec![1.0, 2.0]);
        other.stage = Stage::Autoencoder;
        assert!(matches!(
            fed_avg(&[update("a", vec![1.0, 2.0]), other]),
            Err(Error::Contract(_))
        ));
        assert!(fed_avg(&[update("a", vec![1.0, 2.0]), update("b", vec![1.0])]).is_err());
        assert!(fed_avg(&[]).is_err());
    }
}
