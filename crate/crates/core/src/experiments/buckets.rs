//! Prediction error grouped by how far each battery is into its life.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::federation::BatteryPredictions;
use crate::policy::prediction_error;

/// Decile of life fraction for cycle `k` of a battery failing at `t_f`:
/// `floor(10 k / t_f)` kept within `1..=9`.
pub fn life_bucket(k: u32, t_f: u32) -> usize {
    let b = (10 * u64::from(k)) / u64::from(t_f.max(1));
    (b as usize).clamp(1, 9)
}

/// Linear-interpolation quantile of sorted values (`q` in `[0, 1]`).
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    /// Lower edge of the bucket in percent of life (10, 20, ..., 90).
    pub percentile: u32,
    pub count: usize,
    pub mean: Option<f64>,
    pub mean_abs: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationBucketSummary {
    pub buckets: Vec<BucketStats>,
}

impl DegradationBucketSummary {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["percentile", "count", "mean", "mean_abs", "q1", "median", "q3"])
            .expect("in-memory write");
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for b in &self.buckets {
            w.write_record([
                b.percentile.to_string(),
                b.count.to_string(),
                fmt(b.mean),
                fmt(b.mean_abs),
                fmt(b.q1),
                fmt(b.median),
                fmt(b.q3),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Mean absolute error over all cycles, weighting buckets by their counts.
    pub fn overall_mean_abs(&self) -> Option<f64> {
        let n: usize = self.buckets.iter().map(|b| b.count).sum();
        if n == 0 {
            return None;
        }
        let total: f64 = self
            .buckets
            .iter()
            .filter_map(|b| b.mean_abs.map(|m| m * b.count as f64))
            .sum();
        Some(total / n as f64)
    }
}

/// Relative prediction error of every cycle, grouped into life-fraction
/// deciles. Uses raw (unclamped) predictions.
pub fn bucket_errors(predictions: &[BatteryPredictions]) -> Result<DegradationBucketSummary> {
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); 9];
    for bp in predictions {
        for (&k, &p) in bp.cycles.iter().zip(&bp.predicted) {
            let e = prediction_error(p, f64::from(k), f64::from(bp.t_f))?;
            errors[life_bucket(k, bp.t_f) - 1].push(e);
        }
    }
    let buckets = errors
        .into_iter()
        .enumerate()
        .map(|(i, mut es)| {
            let n = es.len();
            let mean = (n > 0).then(|| es.iter().sum::<f64>() / n as f64);
            let mean_abs = (n > 0).then(|| es.iter().map(|e| e.abs()).sum::<f64>() / n as f64);
            es.sort_by(f64::total_cmp);
            BucketStats {
                percentile: 10 * (i as u32 + 1),
                count: n,
                mean,
                mean_abs,
                q1: quantile(&es, 0.25),
                median: quantile(&es, 0.5),
                q3: quantile(&es, 0.75),
            }
        })
        .collect();
    Ok(DegradationBucketSummary { buckets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn battery(t_f: u32, from: u32, f: impl Fn(u32) -> f64) -> BatteryPredictions {
        let cycles: Vec<u32> = (from..=t_f).collect();
        BatteryPredictions {
            battery_id: format!("b{t_f}"),
            t_f,
            predicted: cycles.iter().map(|&k| f(k)).collect(),
            cycles,
        }
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(life_bucket(55, 100), 5);
        assert_eq!(life_bucket(5, 100), 1);
        assert_eq!(life_bucket(100, 100), 9);
        assert_eq!(life_bucket(99, 100), 9);
        assert_eq!(life_bucket(20, 100), 2);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn perfect_predictions_have_zero_error() {
        let s = bucket_errors(&[battery(300, 1, |k| f64::from(300 - k))]).unwrap();
        for b in &s.buckets {
            assert_eq!(b.mean, Some(0.0));
            assert_eq!(b.median, Some(0.0));
        }
    }

    #[test]
    fn proportional_overestimate_matches_closed_form() {
        // p = 1.1 (t_f - k) gives E = 0.1 (t_f - k) / t_f = 0.1 (1 - k / t_f)
        let t_f = 100;
        let s = bucket_errors(&[battery(t_f, 1, |k| 1.1 * f64::from(t_f - k))]).unwrap();
        let b5 = &s.buckets[4];
        let expected: f64 = (50..=59).map(|k| 0.1 * (1.0 - f64::from(k) / 100.0)).sum::<f64>() / 10.0;
        assert_eq!(b5.count, 10);
        assert!((b5.mean.unwrap() - expected).abs() < 1e-12);
        assert!((b5.mean.unwrap() - 0.0455).abs() < 1e-12);
    }
}
