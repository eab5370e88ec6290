//! Per-battery replacement economics.
//!
//! Times are whole periods (cycles read as days). A battery with trigger
//! time `t*` and failure time `t_f` is replaced preventively when the crew
//! arrives strictly before failure, `t* + t_c < t_f`; otherwise, and when no
//! trigger ever fires, it runs to failure and is replaced correctively.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplacementEconomics {
    /// Cost of a preventive replacement.
    pub c_r: f64,
    /// Cost of a corrective replacement after failure.
    pub c_f: f64,
    /// Periods between the replacement request and crew arrival.
    pub t_c: u32,
    /// Periods the replacement itself takes.
    pub t_m: u32,
    /// Candidate RUL thresholds for the predictive policy.
    pub delta_candidates: Vec<f64>,
    /// Mean cost rate above which retraining is requested.
    pub alpha: f64,
}

impl Default for ReplacementEconomics {
    fn default() -> Self {
        Self {
            c_r: 10.0,
            c_f: 50.0,
            t_c: 5,
            t_m: 2,
            delta_candidates: vec![10.0, 25.0, 50.0, 100.0],
            alpha: 0.1,
        }
    }
}

impl ReplacementEconomics {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_r > 0.0 && self.c_f >= self.c_r && self.c_f.is_finite()) {
            return Err(Error::Config(format!(
                "costs must satisfy c_f >= c_r > 0 (c_r = {}, c_f = {})",
                self.c_r, self.c_f
            )));
        }
        if self.delta_candidates.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Config("delta candidates must be finite and >= 0".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha {} must be positive", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplacementKind {
    Preventive,
    Corrective,
}

fn is_preventive(t_star: Option<u32>, t_f: u32, t_c: u32) -> bool {
    matches!(t_star, Some(t) if u64::from(t) + u64::from(t_c) < u64::from(t_f))
}

/// Relative prediction error `((p + t) - t_f) / t_f`; positive means the
/// predicted failure lies after the true one.
pub fn prediction_error(p: f64, t: f64, t_f: f64) -> Result<f64> {
    if !(t_f > 0.0) {
        return Err(Error::Domain(format!("failure time {t_f} must be positive")));
    }
    Ok(((p + t) - t_f) / t_f)
}

/// First age whose predicted RUL is at or below `delta`.
pub fn predictive_trigger_time(predictions: &[f64], ages: &[u32], delta: f64) -> Option<u32> {
    predictions
        .iter()
        .zip(ages)
        .find(|(p, _)| **p <= delta)
        .map(|(_, &age)| age)
}

/// Long-run average cost rate of one battery and the kind of replacement it gets.
pub fn cost_rate(
    t_star: Option<u32>,
    t_f: u32,
    econ: &ReplacementEconomics,
) -> Result<(f64, ReplacementKind)> {
    if t_f == 0 {
        return Err(Error::Domain("failure time must be positive".into()));
    }
    match t_star {
        Some(t) if is_preventive(t_star, t_f, econ.t_c) => Ok((
            econ.c_r / (f64::from(t) + f64::from(econ.t_c)),
            ReplacementKind::Preventive,
        )),
        _ => Ok((econ.c_f / f64::from(t_f), ReplacementKind::Corrective)),
    }
}

/// Periods of life discarded by a preventive replacement,
/// `t_f - (t* + t_c + t_m)`. Negative when the replacement straddles failure.
pub fn unused_life(t_star: u32, t_f: u32, econ: &ReplacementEconomics) -> Result<i64> {
    if !is_preventive(Some(t_star), t_f, econ.t_c) {
        return Err(Error::Contract(format!(
            "unused life is defined for preventive replacements only (t* = {t_star}, t_c = {}, t_f = {t_f})",
            econ.t_c
        )));
    }
    Ok(i64::from(t_f) - (i64::from(t_star) + i64::from(econ.t_c) + i64::from(econ.t_m)))
}

/// Periods the battery is out of service around its replacement.
pub fn unavailable_days(t_star: Option<u32>, t_f: u32, econ: &ReplacementEconomics) -> u32 {
    let down = econ.t_c + econ.t_m;
    match t_star {
        Some(_) if is_preventive(t_star, t_f, econ.t_c) => econ.t_m,
        // crew requested before failure but arrives after it
        Some(t) if t < t_f => down - (t_f - t),
        _ => down,
    }
}

/// Age-based periodic trigger minimizing the fleet's summed cost rate.
/// Ties go to the smaller candidate.
pub fn optimal_periodic_trigger(
    failure_times: &[u32],
    candidates: &[u32],
    econ: &ReplacementEconomics,
) -> Result<u32> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate trigger times".into()));
    }
    if failure_times.is_empty() {
        return Err(Error::Config("no training batteries to optimize over".into()));
    }
    let mut best: Option<(f64, u32)> = None;
    for &t in candidates {
        let mut total = 0.0;
        for &t_f in failure_times {
            total += cost_rate(Some(t), t_f, econ)?.0;
        }
        best = match best {
            Some((c, b)) if c < total || (c == total && b <= t) => Some((c, b)),
            _ => Some((total, t)),
        };
    }
    Ok(best.expect("at least one candidate").1)
}
