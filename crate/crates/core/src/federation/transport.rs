//! Wire formats and the message audit log of the simulated harness.
//!
//! Every payload that crosses the client/coordinator boundary is serialized
//! to bytes by the sender and decoded by the receiver, and every crossing is
//! recorded in a [`MessageLog`].
//!
//! `ModelUpdate` wire layout (all integers and floats little-endian):
//!
//! ```text
//! u8   stage tag (0 = autoencoder, 1 = rul)
//! u32  client_id length in bytes, followed by the UTF-8 client_id
//! u64  sample_count
//! u32  snapshot count
//! per snapshot:
//!   u32  block count
//!   per block: u32 rows, u32 cols
//!   f64  values, rows*cols per block in block order
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, TrainConfig, WeightSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Autoencoder,
    Rul,
}

impl Stage {
    pub fn tag(self) -> u8 {
        match self {
            Stage::Autoencoder => 0,
            Stage::Rul => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Stage::Autoencoder),
            1 => Ok(Stage::Rul),
            t => Err(wire_error(format!("unknown stage tag {t}"))),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Autoencoder => "autoencoder",
            Stage::Rul => "rul",
        })
    }
}

fn wire_error(message: impl Into<String>) -> Error {
    Error::parse("<wire>", 0, message)
}

/// Weights returned by (or broadcast to) one client for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelUpdate {
    pub client_id: String,
    pub stage: Stage,
    /// `[encoder, decoder]` for the autoencoder stage, `[rul]` for the RUL stage.
    pub snapshots: Vec<WeightSnapshot>,
    /// Rows used for local training. Diagnostic only; averaging is unweighted.
    pub sample_count: u64,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| wire_error(format!("truncated payload at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(wire_error(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )))
        }
    }
}

impl ModelUpdate {
    pub fn encode(&self) -> Vec<u8> {
        let floats: usize = self.snapshots.iter().map(WeightSnapshot::len).sum();
        let mut out = Vec::with_capacity(32 + self.client_id.len() + floats * 8);
        out.push(self.stage.tag());
        out.extend_from_slice(&(self.client_id.len() as u32).to_le_bytes());
        out.extend_from_slice(self.client_id.as_bytes());
        out.extend_from_slice(&self.sample_count.to_le_bytes());
        out.extend_from_slice(&(self.snapshots.len() as u32).to_le_bytes());
        for snap in &self.snapshots {
            out.extend_from_slice(&(snap.shape_spec().len() as u32).to_le_bytes());
            for &(r, c) in snap.shape_spec() {
                out.extend_from_slice(&(r as u32).to_le_bytes());
                out.extend_from_slice(&(c as u32).to_le_bytes());
            }
            for v in snap.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        let stage = Stage::from_tag(rd.u8()?)?;
        let id_len = rd.u32()? as usize;
        let client_id = std::str::from_utf8(rd.take(id_len)?)
            .map_err(|_| wire_error("client_id is not UTF-8"))?
            .to_string();
        let sample_count = rd.u64()?;
        let n_snaps = rd.u32()? as usize;
        let mut snapshots = Vec::with_capacity(n_snaps.min(16));
        for _ in 0..n_snaps {
            let n_blocks = rd.u32()? as usize;
            let mut spec = Vec::with_capacity(n_blocks.min(1024));
            for _ in 0..n_blocks {
                spec.push((rd.u32()? as usize, rd.u32()? as usize));
            }
            let count: usize = spec.iter().map(|(r, c)| r * c).sum();
            if count.saturating_mul(8) > bytes.len() {
                return Err(wire_error("block sizes exceed payload length"));
            }
            let values = (0..count).map(|_| rd.f64()).collect::<Result<Vec<_>>>()?;
            snapshots.push(WeightSnapshot::new(values, spec)?);
        }
        rd.finish()?;
        Ok(Self {
            client_id,
            stage,
            snapshots,
            sample_count,
        })
    }
}

/// Per-round training instructions sent to a client alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundConfig {
    pub stage: Stage,
    pub round: u32,
    pub data_ratio: f64,
    /// RUL targets are divided by this before training (1 for the autoencoder stage).
    pub target_scale: f64,
    pub train: TrainConfig,
}

impl RoundConfig {
    pub const WIRE_LEN: usize = 1 + 4 + 8 + 8 + 4 + 4 + 8 * 4;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::WIRE_LEN);
        out.push(self.stage.tag());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&self.data_ratio.to_le_bytes());
        out.extend_from_slice(&self.target_scale.to_le_bytes());
        out.extend_from_slice(&(self.train.epochs as u32).to_le_bytes());
        out.extend_from_slice(&(self.train.batch_size as u32).to_le_bytes());
        let a = self.train.adam;
        for v in [a.lr, a.beta1, a.beta2, a.epsilon] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        let stage = Stage::from_tag(rd.u8()?)?;
        let round = rd.u32()?;
        let data_ratio = rd.f64()?;
        let target_scale = rd.f64()?;
        let epochs = rd.u32()? as usize;
        let batch_size = rd.u32()? as usize;
        let adam = AdamConfig {
            lr: rd.f64()?,
            beta1: rd.f64()?,
            beta2: rd.f64()?,
            epsilon: rd.f64()?,
        };
        rd.finish()?;
        Ok(Self {
            stage,
            round,
            data_ratio,
            target_scale,
            train: TrainConfig {
                epochs,
                batch_size,
                adam,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadKind {
    Weights,
    Config,
    MetricsScalar,
    /// Raw feature rows; only ever produced by declared pooling.
    RawRows,
}

impl FromStr for PayloadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" => Ok(Self::Weights),
            "config" => Ok(Self::Config),
            "metrics-scalar" => Ok(Self::MetricsScalar),
            "raw-rows" => Ok(Self::RawRows),
            other => Err(Error::Config(format!("unknown payload kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    CoordinatorToClient,
    ClientToCoordinator,
    /// Data moved into a pooled training set (centralized and clustered modes).
    Pooling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub round: u32,
    pub stage: Option<Stage>,
    pub direction: Direction,
    pub kind: PayloadKind,
    pub peer: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageLog {
    records: Vec<MessageRecord>,
}

impl MessageLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, rec: MessageRecord) {
        self.records.push(rec);
    }

    pub fn records(&self) -> &[MessageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, kind: PayloadKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    pub fn count_in_stage(&self, kind: PayloadKind, stage: Stage) -> usize {
        self.records
            .iter()
            .filter(|r| r.kind == kind && r.stage == Some(stage))
            .count()
    }

    pub fn raw_row_payloads(&self) -> usize {
        self.count(PayloadKind::RawRows)
    }

    /// Bytes crossing the boundary in each round of `stage`, ordered by round.
    pub fn bytes_per_round(&self, stage: Stage) -> Vec<(u32, usize)> {
        let mut out: Vec<(u32, usize)> = Vec::new();
        for r in self.records.iter().filter(|r| r.stage == Some(stage)) {
            match out.iter_mut().find(|(round, _)| *round == r.round) {
                Some((_, b)) => *b += r.bytes,
                None => out.push((r.round, r.bytes)),
            }
        }
        out.sort_by_key(|(round, _)| *round);
        out
    }

    pub fn total_bytes(&self) -> usize {
        self.records.iter().map(|r| r.bytes).sum()
    }

    /// Fails if any raw-row payload was logged.
    pub fn assert_diode(&self) -> Result<()> {
        match self.records.iter().find(|r| r.kind == PayloadKind::RawRows) {
            None => Ok(()),
            Some(r) => Err(Error::Contract(format!(
                "raw rows from `{}` crossed the client boundary in round {}",
                r.peer, r.round
            ))),
        }
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse("<jsonl>", i + 1, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records })
    }

    /// The log with peer names removed; used to compare message patterns.
    pub fn shape(&self) -> Vec<(u32, Option<Stage>, Direction, PayloadKind)> {
        self.records
            .iter()
            .map(|r| (r.round, r.stage, r.direction, r.kind))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn update() -> ModelUpdate {
        ModelUpdate {
            client_id: "B0007".into(),
            stage: Stage::Autoencoder,
            snapshots: vec![
                WeightSnapshot::new(vec![1.0, -2.5, 3.25, 0.0, 1e-300, -0.0], vec![(2, 2), (2, 1)]).unwrap(),
                WeightSnapshot::new(vec![42.0], vec![(1, 1)]).unwrap(),
            ],
            sample_count: 17,
        }
    }

    #[test]
    fn update_wire_layout() {
        let bytes = update().encode();
        assert_eq!(bytes[0], 0);
        assert_eq!(u32::from_le_bytes(bytes[1..5].try_into().unwrap()), 5);
        assert_eq!(&bytes[5..10], b"B0007");
        assert_eq!(u64::from_le_bytes(bytes[10..18].try_into().unwrap()), 17);
        assert_eq!(u32::from_le_bytes(bytes[18..22].try_into().unwrap()), 2);
        let expected = 1 + 4 + 5 + 8 + 4 + (4 + 2 * 8 + 6 * 8) + (4 + 8 + 8);
        assert_eq!(bytes.len(), expected);
        let decoded = ModelUpdate::decode(&bytes).unwrap();
        assert_eq!(decoded.client_id, "B0007");
        assert!(decoded.snapshots[0].bit_eq(&update().snapshots[0]));
    }

    #[test]
    fn truncated_and_trailing_bytes_are_rejected() {
        let bytes = update().encode();
        assert!(ModelUpdate::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(ModelUpdate::decode(&longer).is_err());
        let mut bad_stage = bytes;
        bad_stage[0] = 9;
        assert!(ModelUpdate::decode(&bad_stage).is_err());
    }

    #[test]
    fn round_config_round_trips() {
        let cfg = RoundConfig {
            stage: Stage::Rul,
            round: 12,
            data_ratio: 0.5,
            target_scale: 100.0,
            train: TrainConfig::default(),
        };
        let bytes = cfg.encode();
        assert_eq!(bytes.len(), RoundConfig::WIRE_LEN);
        assert_eq!(RoundConfig::decode(&bytes).unwrap(), cfg);
    }

    #[test]
    fn diode_audit_flags_raw_rows() {
        let mut log = MessageLog::new();
        log.record(MessageRecord {
            round: 1,
            stage: Some(Stage::Rul),
            direction: Direction::ClientToCoordinator,
            kind: PayloadKind::Weights,
            peer: "a".into(),
            bytes: 10,
        });
        assert!(log.assert_diode().is_ok());
        log.record(MessageRecord {
            round: 0,
            stage: None,
            direction: Direction::Pooling,
            kind: PayloadKind::RawRows,
            peer: "a".into(),
            bytes: 100,
        });
        assert!(log.assert_diode().is_err());
        let text = log.to_jsonl();
        assert!(text.contains("\"kind\":\"raw-rows\""));
        assert_eq!(MessageLog::from_jsonl(&text).unwrap(), log);
    }
}
