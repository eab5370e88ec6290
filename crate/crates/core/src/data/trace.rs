use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-cycle channels of the CSV schema, in column order.
pub const CHANNELS: [&str; 7] = [
    "discharge_capacity",
    "charge_capacity",
    "avg_temp",
    "min_temp",
    "max_temp",
    "internal_resistance",
    "charge_time",
];

/// Index of the capacity channel used for the end-of-life rule.
pub const CAPACITY_CHANNEL: usize = 0;

/// Fraction of nominal capacity at which a cell is considered failed.
pub const END_OF_LIFE_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle_index: u32,
    /// One value per entry of the owning trace's channel list.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryTrace {
    pub battery_id: String,
    pub channels: Vec<String>,
    pub records: Vec<CycleRecord>,
    /// First cycle whose capacity falls below 80% of nominal.
    pub t_f: u32,
    pub nominal_capacity: f64,
}

impl BatteryTrace {
    /// Checks ordering, contiguity, channel consistency, finiteness and `t_f` bounds.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Contract(format!("trace {}: {msg}", self.battery_id)));
        if self.records.is_empty() {
            return bad("no cycle records".into());
        }
        for (i, rec) in self.records.iter().enumerate() {
            if rec.cycle_index as usize != i + 1 {
                return bad(format!(
                    "cycle indices must run 1,2,3,...; found {} at position {}",
                    rec.cycle_index,
                    i + 1
                ));
            }
            if rec.values.len() != self.channels.len() {
                return bad(format!("cycle {} has the wrong channel count", rec.cycle_index));
            }
            if rec.values.iter().any(|v| !v.is_finite()) {
                return bad(format!("cycle {} has a non-finite value", rec.cycle_index));
            }
        }
        if self.t_f == 0 || self.t_f > self.last_cycle() {
            return bad(format!(
                "t_f {} outside 1..={}",
                self.t_f,
                self.last_cycle()
            ));
        }
        Ok(())
    }

    pub fn last_cycle(&self) -> u32 {
        self.records.last().map_or(0, |r| r.cycle_index)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Values of one channel across all cycles.
    pub fn channel_series(&self, channel: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.values[channel]).collect()
    }
}

/// First cycle whose capacity is strictly below `0.8 * nominal`.
pub fn first_eol_crossing(capacity: &[f64], nominal: f64) -> Option<u32> {
    let limit = END_OF_LIFE_FRACTION * nominal;
    capacity
        .iter()
        .position(|&q| q < limit)
        .map(|i| i as u32 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// A set of battery traces with an optional battery-level train/test split.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Fleet {
    pub traces: Vec<BatteryTrace>,
    /// Parallel to `traces` once a split is assigned.
    pub assignment: Option<Vec<Split>>,
}

impl Fleet {
    pub fn new(traces: Vec<BatteryTrace>) -> Self {
        Self {
            traces,
            assignment: None,
        }
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    fn with_split(&self, which: Split) -> Vec<&BatteryTrace> {
        match &self.assignment {
            None => Vec::new(),
            Some(a) => self
                .traces
                .iter()
                .zip(a)
                .filter(|(_, &s)| s == which)
                .map(|(t, _)| t)
                .collect(),
        }
    }

    pub fn train(&self) -> Vec<&BatteryTrace> {
        self.with_split(Split::Train)
    }

    pub fn test(&self) -> Vec<&BatteryTrace> {
        self.with_split(Split::Test)
    }

    pub fn get(&self, battery_id: &str) -> Option<&BatteryTrace> {
        self.traces.iter().find(|t| t.battery_id == battery_id)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<&str> = self.traces.iter().map(|t| t.battery_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Contract(format!("duplicate battery id {}", w[0])));
        }
        if let Some(a) = &self.assignment {
            if a.len() != self.traces.len() {
                return Err(Error::Contract("split assignment length mismatch".into()));
            }
        }
        self.traces.iter().try_for_each(BatteryTrace::validate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eol_crossing_is_strict() {
        assert_eq!(first_eol_crossing(&[1.0, 0.9, 0.8, 0.79], 1.0), Some(4));
        assert_eq!(first_eol_crossing(&[1.0, 0.9], 1.0), None);
    }
}
