//! Prognosis quality and replacement economics: prediction error, the
//! predictive and age-based periodic replacement policies, their cost
//! rates, unused life and unavailable periods, and fleet reports.

mod economics;
mod report;

pub use economics::{
    cost_rate, optimal_periodic_trigger, prediction_error, predictive_trigger_time,
    unavailable_days, unused_life, ReplacementEconomics, ReplacementKind,
};
pub use report::{
    evaluate_periodic, evaluate_policy, reports_to_csv, retraining_monitor, select_delta,
    BatteryOutcome, FleetReport, PolicyKind, REPORT_COLUMNS,
};
