//! Round schedule, architecture settings and seed derivation.

use serde::{Deserialize, Serialize};

use super::transport::Stage;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    /// Communication rounds of the autoencoder stage.
    pub rounds_autoencoder: u32,
    /// Communication rounds of the RUL stage.
    pub rounds_rul: u32,
    /// Clients sampled per round.
    pub clients_per_round: usize,
    /// Fraction of local rows each sampled client trains on per round.
    pub data_ratio: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            rounds_autoencoder: 200,
            rounds_rul: 500,
            clients_per_round: 10,
            data_ratio: 0.5,
            local_epochs: 5,
            batch_size: 32,
            learning_rate: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
        }
    }
}

impl FederationConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.local_epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
        }
    }

    pub fn rounds(&self, stage: Stage) -> u32 {
        match stage {
            Stage::Autoencoder => self.rounds_autoencoder,
            Stage::Rul => self.rounds_rul,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds_autoencoder == 0 || self.rounds_rul == 0 {
            return Err(Error::Config("both stages need at least one round".into()));
        }
        if self.clients_per_round == 0 {
            return Err(Error::Config("clients_per_round must be at least 1".into()));
        }
        if !(self.data_ratio > 0.0 && self.data_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "data_ratio {} must lie in (0, 1]",
                self.data_ratio
            )));
        }
        self.train_config().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    /// Width of the compressed representation.
    pub bottleneck: usize,
    /// Hidden width of encoder and decoder; `None` means `ceil(d_in / 2)`.
    pub encoder_hidden: Option<usize>,
    pub rul_hidden: Vec<usize>,
    /// RUL targets are trained in units of this many cycles.
    pub target_scale: f64,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            bottleneck: 30,
            encoder_hidden: None,
            rul_hidden: vec![64, 64, 32, 32, 16, 16],
            target_scale: 100.0,
        }
    }
}

impl ArchitectureConfig {
    pub fn encoder_dims(&self, d_in: usize) -> Vec<usize> {
        let hidden = self.encoder_hidden.unwrap_or(d_in.div_ceil(2));
        vec![d_in, hidden, self.bottleneck]
    }

    pub fn decoder_dims(&self, d_in: usize) -> Vec<usize> {
        let mut dims = self.encoder_dims(d_in);
        dims.reverse();
        dims
    }

    pub fn rul_dims(&self, input: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.rul_hidden.len() + 2);
        dims.push(input);
        dims.extend(&self.rul_hidden);
        dims.push(1);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.bottleneck == 0 || self.encoder_hidden == Some(0) || self.rul_hidden.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(self.target_scale.is_finite() && self.target_scale > 0.0) {
            return Err(Error::Config(format!(
                "target_scale {} must be positive",
                self.target_scale
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines two seed words into one.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed owned by a client, derived from the run seed and its id.
pub fn client_seed(base: u64, client_id: &str) -> u64 {
    mix_seed(base, fnv1a(client_id.as_bytes()))
}

/// Seed for one client's work in one round of one stage.
pub fn round_seed(client_seed: u64, stage: Stage, round: u32) -> u64 {
    mix_seed(mix_seed(client_seed, stage.tag() as u64 + 1), round as u64)
}

/// Seed of the coordinator's client sampler.
pub fn sampler_seed(base: u64) -> u64 {
    mix_seed(base, 0x5A4D_504C_4552)
}

/// Seed of the coordinator's weight initializer.
pub fn init_seed(base: u64) -> u64 {
    mix_seed(base, 0x494E_4954)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes() {
        let a = ArchitectureConfig::default();
        assert_eq!(a.encoder_dims(42), vec![42, 21, 30]);
        assert_eq!(a.decoder_dims(42), vec![30, 21, 42]);
        assert_eq!(a.rul_dims(30), vec![30, 64, 64, 32, 32, 16, 16, 1]);
        assert_eq!(a.rul_dims(30).len() - 1, 7);
    }

    #[test]
    fn seeds_separate_clients_stages_and_rounds() {
        let a = client_seed(1, "B0000");
        assert_ne!(a, client_seed(1, "B0001"));
        assert_ne!(a, client_seed(2, "B0000"));
        assert_ne!(round_seed(a, Stage::Autoencoder, 0), round_seed(a, Stage::Rul, 0));
        assert_ne!(round_seed(a, Stage::Rul, 0), round_seed(a, Stage::Rul, 1));
        assert_eq!(round_seed(a, Stage::Rul, 3), round_seed(a, Stage::Rul, 3));
    }

    #[test]
    fn validation() {
        assert!(FederationConfig::default().validate().is_ok());
        let bad = FederationConfig {
            data_ratio: 0.0,
            ..FederationConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FederationConfig {
            rounds_rul: 0,
            ..FederationConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
