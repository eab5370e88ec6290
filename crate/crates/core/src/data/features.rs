//! Per-cycle feature engineering and RUL targets.
//!
//! For every eligible cycle `k` (from the activation cycle through `t_f`) a row
//! holds the raw channel values at `k`, the windowed mean, variance, skewness
//! and excess kurtosis of each channel over cycles `k-w+1..=k`, and the change
//! of each channel since cycle `k-1`. Windows near the start of the trace
//! shrink to the available prefix.

use log::warn;
use serde::{Deserialize, Serialize};

use super::trace::BatteryTrace;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Below this second central moment, skewness and kurtosis are reported as 0.
pub const DEGENERATE_M2: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Population (biased) variance.
    pub variance: f64,
    pub skewness: f64,
    /// Excess kurtosis, `m4 / m2^2 - 3`.
    pub kurtosis: f64,
}

/// Population moments of a non-empty sample.
pub fn moments(values: &[f64]) -> Moments {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 < DEGENERATE_M2 {
        return Moments {
            mean,
            variance: m2,
            skewness: 0.0,
            kurtosis: 0.0,
        };
    }
    Moments {
        mean,
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2) - 3.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub window: usize,
    pub activation_cycle: u32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window: 20,
            activation_cycle: 100,
        }
    }
}

/// Engineered rows of one battery with their RUL targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub battery_id: String,
    pub columns: Vec<String>,
    pub cycles: Vec<u32>,
    pub features: Matrix,
    /// `t_f - cycle` per row.
    pub targets: Vec<f64>,
    pub t_f: u32,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn target_matrix(&self) -> Matrix {
        Matrix::column(&self.targets)
    }
}

/// Column names produced for a channel list.
pub fn feature_columns(channels: &[String]) -> Vec<String> {
    let mut cols: Vec<String> = channels.to_vec();
    for ch in channels {
        for stat in ["mean", "var", "skew", "kurt"] {
            cols.push(format!("{ch}_{stat}"));
        }
    }
    cols.extend(channels.iter().map(|ch| format!("{ch}_delta")));
    cols
}

/// Cycles `activation_cycle..=t_f`, truncated to the recorded trace.
fn eligible_cycles(trace: &BatteryTrace, activation_cycle: u32) -> std::ops::RangeInclusive<u32> {
    let end = trace.t_f.min(trace.last_cycle());
    activation_cycle.max(1)..=end
}

/// RUL target `t_f - k` for every eligible cycle `k`.
pub fn compute_rul_targets(trace: &BatteryTrace, activation_cycle: u32) -> Result<Vec<f64>> {
    if activation_cycle == 0 {
        return Err(Error::Config("activation cycle must be at least 1".into()));
    }
    if trace.t_f < activation_cycle {
        warn!(
            "battery {} fails at cycle {} before activation cycle {activation_cycle}; no targets",
            trace.battery_id, trace.t_f
        );
        return Ok(Vec::new());
    }
    Ok(eligible_cycles(trace, activation_cycle)
        .map(|k| f64::from(trace.t_f - k))
        .collect())
}

pub fn engineer_features(trace: &BatteryTrace, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    if cfg.window == 0 {
        return Err(Error::Config("feature window must be at least 1".into()));
    }
    let columns = feature_columns(&trace.channels);
    let targets = compute_rul_targets(trace, cfg.activation_cycle)?;
    let n_ch = trace.channels.len();
    let series: Vec<Vec<f64>> = (0..n_ch).map(|c| trace.channel_series(c)).collect();

    let cycles: Vec<u32> = if targets.is_empty() {
        Vec::new()
    } else {
        eligible_cycles(trace, cfg.activation_cycle).collect()
    };
    let mut data = Vec::with_capacity(cycles.len() * columns.len());
    for &k in &cycles {
        let idx = (k - 1) as usize;
        let start = (idx + 1).saturating_sub(cfg.window);
        for s in &series {
            data.push(s[idx]);
        }
        for s in &series {
            let m = moments(&s[start..=idx]);
            data.extend_from_slice(&[m.mean, m.variance, m.skewness, m.kurtosis]);
        }
        for s in &series {
            data.push(if idx == 0 { 0.0 } else { s[idx] - s[idx - 1] });
        }
    }
    let features = Matrix::from_vec(cycles.len(), columns.len(), data)?;
    if !features.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite engineered feature for battery {}",
            trace.battery_id
        )));
    }
    Ok(FeatureMatrix {
        battery_id: trace.battery_id.clone(),
        columns,
        cycles,
        features,
        targets,
        t_f: trace.t_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::trace::CycleRecord;

    /// Textbook oracle via raw power sums.
    fn oracle(xs: &[f64]) -> (f64, f64, f64, f64) {
        let n = xs.len() as f64;
        let s1: f64 = xs.iter().sum();
        let s2: f64 = xs.iter().map(|x| x * x).sum();
        let s3: f64 = xs.iter().map(|x| x * x * x).sum();
        let s4: f64 = xs.iter().map(|x| x * x * x * x).sum();
        let mu = s1 / n;
        let var = s2 / n - mu * mu;
        let m3 = s3 / n - 3.0 * mu * s2 / n + 2.0 * mu.powi(3);
        let m4 = s4 / n - 4.0 * mu * s3 / n + 6.0 * mu * mu * s2 / n - 3.0 * mu.powi(4);
        (mu, var, m3 / var.powf(1.5), m4 / (var * var) - 3.0)
    }

    #[test]
    fn constant_window_is_degenerate() {
        let m = moments(&[4.2; 7]);
        assert_eq!((m.variance, m.skewness, m.kurtosis), (0.0, 0.0, 0.0));
        assert_eq!(m.mean, 4.2);
    }

    #[test]
    fn mean_and_variance_by_hand() {
        let m = moments(&[1.0, 2.0, 3.0]);
        assert!((m.mean - 2.0).abs() < 1e-15);
        assert!((m.variance - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn skew_and_kurtosis_match_oracle() {
        let xs = [1.0, 2.0, 3.0, 4.0, 10.0];
        let m = moments(&xs);
        let (mu, var, g1, g2) = oracle(&xs);
        assert!((m.mean - mu).abs() < 1e-9);
        assert!((m.variance - var).abs() < 1e-9);
        assert!((m.skewness - g1).abs() < 1e-9);
        assert!((m.kurtosis - g2).abs() < 1e-9);
    }

    fn ramp_trace(t_f: u32, len: u32) -> BatteryTrace {
        BatteryTrace {
            battery_id: "r".into(),
            channels: vec!["discharge_capacity".into(), "avg_temp".into()],
            records: (1..=len)
                .map(|k| CycleRecord {
                    cycle_index: k,
                    values: vec![1.0 - 0.001 * f64::from(k), 30.0],
                })
                .collect(),
            t_f,
            nominal_capacity: 1.0,
        }
    }

    #[test]
    fn targets_count_down_to_zero() {
        let t = ramp_trace(150, 160);
        let y = compute_rul_targets(&t, 100).unwrap();
        assert_eq!(y.len(), 51);
        assert_eq!(y.first(), Some(&50.0));
        assert_eq!(y.last(), Some(&0.0));
    }

    #[test]
    fn early_failure_gives_no_rows() {
        let t = ramp_trace(90, 100);
        assert!(compute_rul_targets(&t, 100).unwrap().is_empty());
        let fm = engineer_features(&t, &FeatureConfig::default()).unwrap();
        assert_eq!(fm.rows(), 0);
        assert_eq!(fm.features.cols(), fm.columns.len());
    }

    #[test]
    fn feature_layout_and_values() {
        let t = ramp_trace(120, 130);
        let fm = engineer_features(
            &t,
            &FeatureConfig {
                window: 3,
                activation_cycle: 100,
            },
        )
        .unwrap();
        assert_eq!(fm.columns.len(), 2 + 8 + 2);
        assert_eq!(fm.rows(), 21);
        let row = fm.features.row(0);
        // raw capacity at cycle 100
        assert!((row[0] - 0.9).abs() < 1e-12);
        // window mean of cycles 98..=100
        assert!((row[2] - (1.0 - 0.099)).abs() < 1e-12);
        // constant temperature channel
        assert_eq!(&row[7..10], &[0.0, 0.0, 0.0]);
        // capacity delta
        assert!((row[10] + 0.001).abs() < 1e-12);
        assert_eq!(row[11], 0.0);
    }

    #[test]
    fn window_shrinks_at_trace_start() {
        let t = ramp_trace(5, 5);
        let fm = engineer_features(
            &t,
            &FeatureConfig {
                window: 10,
                activation_cycle: 1,
            },
        )
        .unwrap();
        assert_eq!(fm.rows(), 5);
        // cycle 1: single-value window, zero delta
        let row = fm.features.row(0);
        assert_eq!(row[3], 0.0);
        assert_eq!(row[10], 0.0);
        // cycle 2: mean of first two capacities
        assert!((fm.features.get(1, 2) - (0.999 + 0.998) / 2.0).abs() < 1e-12);
    }
}
