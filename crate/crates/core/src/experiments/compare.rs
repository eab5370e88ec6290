//! Side-by-side policy comparison tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::FleetReport;

/// Row labels of a comparison table, in order.
pub const COMPARISON_ROWS: [&str; 6] = [
    "Trigger Time",
    "# Preventive",
    "# Corrective",
    "Unused Life",
    "Unavailable Days",
    "Cost Rate",
];

/// Label of the row holding each policy's improvement over the first one.
pub const IMPROVEMENT_ROW: &str = "Cost Rate Improvement (%)";

/// Relative cost-rate improvement of `new` over `base`, `(base - new) / base`.
pub fn improvement(base: f64, new: f64) -> f64 {
    if base == new {
        0.0
    } else {
        (base - new) / base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub policies: Vec<String>,
    /// `(label, one cell per policy)` in [`COMPARISON_ROWS`] order.
    pub rows: Vec<(String, Vec<String>)>,
    /// Improvement of each policy over the first, as a fraction.
    pub improvements: Vec<f64>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["metric".to_string()];
        header.extend(self.policies.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, cells) in &self.rows {
            let mut rec = vec![label.clone()];
            rec.extend(cells.iter().cloned());
            w.write_record(&rec).expect("in-memory write");
        }
        let mut rec = vec![IMPROVEMENT_ROW.to_string()];
        rec.extend(self.improvements.iter().map(|i| format!("{:.1}", 100.0 * i)));
        w.write_record(&rec).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn sorted_ids(r: &FleetReport) -> Vec<&str> {
    let mut ids = r.battery_ids();
    ids.sort_unstable();
    ids
}

/// Builds a comparison of named reports; the first is the baseline.
pub fn compare_policies(reports: &[(String, FleetReport)]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(Error::Config("a comparison needs at least two reports".into()));
    }
    let base_ids = sorted_ids(&reports[0].1);
    if let Some((name, _)) = reports.iter().find(|(_, r)| sorted_ids(r) != base_ids) {
        return Err(Error::Contract(format!(
            "report `{name}` covers a different fleet than `{}`",
            reports[0].0
        )));
    }
    let cell = |f: &dyn Fn(&FleetReport) -> String| -> Vec<String> {
        reports.iter().map(|(_, r)| f(r)).collect()
    };
    let rows = vec![
        cell(&|r| r.trigger_time().map_or_else(|| "Predicted".into(), |t| t.to_string())),
        cell(&|r| r.n_preventive.to_string()),
        cell(&|r| r.n_corrective.to_string()),
        cell(&|r| r.mean_unused_life.map_or_else(|| "-".into(), |v| format!("{v:.1}"))),
        cell(&|r| format!("{:.1}", r.mean_unavailable_days)),
        cell(&|r| format!("{:.6}", r.mean_cost_rate)),
    ];
    let base = reports[0].1.mean_cost_rate;
    Ok(ComparisonTable {
        policies: reports.iter().map(|(n, _)| n.clone()).collect(),
        rows: COMPARISON_ROWS
            .iter()
            .map(|l| l.to_string())
            .zip(rows)
            .collect(),
        improvements: reports
            .iter()
            .map(|(_, r)| improvement(base, r.mean_cost_rate))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{evaluate_periodic, ReplacementEconomics};

    #[test]
    fn improvement_arithmetic() {
        assert_eq!((100.0 * improvement(20.3, 12.6)).round(), 38.0);
        assert_eq!((100.0 * improvement(32.5, 25.7)).round(), 21.0);
        assert_eq!((100.0 * improvement(26.5, 20.6)).round(), 22.0);
        assert_eq!(improvement(0.3, 0.3), 0.0);
    }

    #[test]
    fn identical_reports_compare_to_zero() {
        let e = ReplacementEconomics::default();
        let r = evaluate_periodic(&[("a".into(), 200), ("b".into(), 300)], 150, &e).unwrap();
        let t = compare_policies(&[("x".into(), r.clone()), ("y".into(), r)]).unwrap();
        assert_eq!(t.improvements, vec![0.0, 0.0]);
        let csv = t.to_csv();
        let labels: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(&labels[..6], &COMPARISON_ROWS);
        assert!(csv.lines().last().unwrap().ends_with("0.0,0.0"));
    }

    #[test]
    fn mismatched_fleets_are_rejected() {
        let e = ReplacementEconomics::default();
        let a = evaluate_periodic(&[("a".into(), 200)], 150, &e).unwrap();
        let b = evaluate_periodic(&[("b".into(), 200)], 150, &e).unwrap();
        assert!(compare_policies(&[("a".into(), a.clone()), ("b".into(), b)]).is_err());
        assert!(compare_policies(&[("a".into(), a)]).is_err());
    }
}
