//! Fleet-level policy evaluation and reports.

use serde::{Deserialize, Serialize};

use super::economics::{
    cost_rate, predictive_trigger_time, unavailable_days, unused_life, ReplacementEconomics,
    ReplacementKind,
};
use crate::error::{Error, Result};
use crate::federation::BatteryPredictions;

/// Column names of the CSV form of a [`FleetReport`].
pub const REPORT_COLUMNS: [&str; 7] = [
    "trigger_time",
    "n_preventive",
    "n_corrective",
    "mean_unused_life",
    "mean_unavailable_days",
    "mean_cost_rate",
    "threshold",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryOutcome {
    pub battery_id: String,
    pub t_f: u32,
    pub trigger_time: Option<u32>,
    pub kind: ReplacementKind,
    pub cost_rate: f64,
    /// Present for preventive replacements only.
    pub unused_life: Option<i64>,
    pub unavailable_days: u32,
}

impl BatteryOutcome {
    pub fn evaluate(
        battery_id: &str,
        trigger_time: Option<u32>,
        t_f: u32,
        econ: &ReplacementEconomics,
    ) -> Result<Self> {
        let (rate, kind) = cost_rate(trigger_time, t_f, econ)?;
        let unused = match (kind, trigger_time) {
            (ReplacementKind::Preventive, Some(t)) => Some(unused_life(t, t_f, econ)?),
            _ => None,
        };
        Ok(Self {
            battery_id: battery_id.to_string(),
            t_f,
            trigger_time,
            kind,
            cost_rate: rate,
            unused_life: unused,
            unavailable_days: unavailable_days(trigger_time, t_f, econ),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Replace when predicted RUL first drops to `threshold` or below.
    Predictive { threshold: f64 },
    /// Replace every battery at the same age.
    Periodic { trigger_time: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetReport {
    pub policy: PolicyKind,
    pub n_preventive: usize,
    pub n_corrective: usize,
    /// Mean over preventively replaced batteries; `None` when there are none.
    pub mean_unused_life: Option<f64>,
    /// Mean over all batteries.
    pub mean_unavailable_days: f64,
    pub mean_cost_rate: f64,
    /// Number of preventive replacements whose unused life is negative.
    pub n_negative_unused_life: usize,
    pub batteries: Vec<BatteryOutcome>,
}

impl FleetReport {
    pub fn from_outcomes(policy: PolicyKind, batteries: Vec<BatteryOutcome>) -> Result<Self> {
        if batteries.is_empty() {
            return Err(Error::Config("cannot report on an empty fleet".into()));
        }
        let n = batteries.len() as f64;
        let unused: Vec<i64> = batteries.iter().filter_map(|b| b.unused_life).collect();
        let n_preventive = batteries
            .iter()
            .filter(|b| b.kind == ReplacementKind::Preventive)
            .count();
        Ok(Self {
            policy,
            n_preventive,
            n_corrective: batteries.len() - n_preventive,
            mean_unused_life: if unused.is_empty() {
                None
            } else {
                Some(unused.iter().map(|&e| e as f64).sum::<f64>() / unused.len() as f64)
            },
            mean_unavailable_days: batteries.iter().map(|b| f64::from(b.unavailable_days)).sum::<f64>() / n,
            mean_cost_rate: batteries.iter().map(|b| b.cost_rate).sum::<f64>() / n,
            n_negative_unused_life: unused.iter().filter(|&&e| e < 0).count(),
            batteries,
        })
    }

    pub fn threshold(&self) -> Option<f64> {
        match self.policy {
            PolicyKind::Predictive { threshold } => Some(threshold),
            PolicyKind::Periodic { .. } => None,
        }
    }

    pub fn trigger_time(&self) -> Option<u32> {
        match self.policy {
            PolicyKind::Periodic { trigger_time } => Some(trigger_time),
            PolicyKind::Predictive { .. } => None,
        }
    }

    /// Ids of the evaluated batteries in report order.
    pub fn battery_ids(&self) -> Vec<&str> {
        self.batteries.iter().map(|b| b.battery_id.as_str()).collect()
    }

    /// One CSV row in [`REPORT_COLUMNS`] order. A predictive policy's trigger
    /// time is written as `predicted`; absent values are left empty.
    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.trigger_time()
                .map_or_else(|| "predicted".to_string(), |t| t.to_string()),
            self.n_preventive.to_string(),
            self.n_corrective.to_string(),
            self.mean_unused_life.map_or_else(String::new, |v| v.to_string()),
            self.mean_unavailable_days.to_string(),
            self.mean_cost_rate.to_string(),
            self.threshold().map_or_else(String::new, |v| v.to_string()),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::parse("<report>", e.line(), e.to_string())
        })
    }
}

/// Renders reports as CSV with a header row.
pub fn reports_to_csv(reports: &[FleetReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS).expect("in-memory write");
    for r in reports {
        w.write_record(r.csv_row()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Applies the predictive policy with threshold `delta` to every battery.
/// Predictions are clamped at zero before the trigger test.
pub fn evaluate_policy(
    predictions: &[BatteryPredictions],
    delta: f64,
    econ: &ReplacementEconomics,
) -> Result<FleetReport> {
    let outcomes = predictions
        .iter()
        .map(|bp| {
            let t_star = predictive_trigger_time(&bp.clamped(), &bp.cycles, delta);
            BatteryOutcome::evaluate(&bp.battery_id, t_star, bp.t_f, econ)
        })
        .collect::<Result<Vec<_>>>()?;
    FleetReport::from_outcomes(PolicyKind::Predictive { threshold: delta }, outcomes)
}

/// Applies the age-based periodic policy with trigger age `t_star`.
pub fn evaluate_periodic(
    batteries: &[(String, u32)],
    t_star: u32,
    econ: &ReplacementEconomics,
) -> Result<FleetReport> {
    let outcomes = batteries
        .iter()
        .map(|(id, t_f)| BatteryOutcome::evaluate(id, Some(t_star), *t_f, econ))
        .collect::<Result<Vec<_>>>()?;
    FleetReport::from_outcomes(PolicyKind::Periodic { trigger_time: t_star }, outcomes)
}

/// The candidate threshold with the lowest mean cost rate; ties go to the smaller one.
pub fn select_delta(predictions: &[BatteryPredictions], econ: &ReplacementEconomics) -> Result<f64> {
    let mut candidates = econ.delta_candidates.clone();
    if candidates.is_empty() {
        return Err(Error::Config("no threshold candidates".into()));
    }
    candidates.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for d in candidates {
        let cost = evaluate_policy(predictions, d, econ)?.mean_cost_rate;
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, d));
        }
    }
    Ok(best.expect("non-empty").1)
}

/// Whether a report's mean cost rate calls for retraining (strictly above `alpha`).
pub fn retraining_monitor(report: &FleetReport, alpha: f64) -> bool {
    report.mean_cost_rate > alpha
}
