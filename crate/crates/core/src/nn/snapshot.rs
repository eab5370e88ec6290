use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat parameter vector of a network plus the `(rows, cols)` of each block.
///
/// This is the only model payload that crosses the client/coordinator boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSnapshot {
    values: Vec<f64>,
    shape_spec: Vec<(usize, usize)>,
}

impl WeightSnapshot {
    pub fn new(values: Vec<f64>, shape_spec: Vec<(usize, usize)>) -> Result<Self> {
        let expected: usize = shape_spec.iter().map(|(r, c)| r * c).sum();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "snapshot has {} values but its blocks describe {expected}",
                values.len()
            )));
        }
        Ok(Self { values, shape_spec })
    }

    pub(crate) fn new_unchecked(values: Vec<f64>, shape_spec: Vec<(usize, usize)>) -> Self {
        debug_assert_eq!(
            values.len(),
            shape_spec.iter().map(|(r, c)| r * c).sum::<usize>()
        );
        Self { values, shape_spec }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape_spec(&self) -> &[(usize, usize)] {
        &self.shape_spec
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Size in bytes of the float payload.
    pub fn byte_len(&self) -> usize {
        self.values.len() * std::mem::size_of::<f64>()
    }

    /// FNV-1a over the bit patterns of every value and block dimension.
    pub fn checksum(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        for &(r, c) in &self.shape_spec {
            feed(r as u64);
            feed(c as u64);
        }
        for v in &self.values {
            feed(v.to_bits());
        }
        h
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.shape_spec == other.shape_spec
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}
