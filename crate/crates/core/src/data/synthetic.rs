//! Synthetic knee-shaped capacity fade.
//!
//! Capacity follows `q(n) = q0 * (1 - a*n - b*exp(c*(n - knee))) + noise`: a slow
//! linear fade followed by an exponential knee. Per battery the generator draws
//! a target end of life `L`, the share of fade that is linear (`a*L`), the knee
//! position as a fraction of `L` and the knee sharpness `c*(L - knee)`, then
//! solves for `b` so that the clean curve reaches 80% of `q0` at `L`. Auxiliary
//! channels (temperatures, resistance, charge time) are driven by the same fade
//! fraction plus independent noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trace::{first_eol_crossing, BatteryTrace, CycleRecord, Fleet, CHANNELS, END_OF_LIFE_FRACTION};
use crate::error::{Error, Result};

/// Degradation curve parameters of one battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadeParams {
    pub q0: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub knee: f64,
}

impl FadeParams {
    /// Noise-free capacity at cycle `n`.
    pub fn capacity(&self, n: u32) -> f64 {
        let n = f64::from(n);
        self.q0 * (1.0 - self.a * n - self.b * (self.c * (n - self.knee)).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub batteries: usize,
    pub max_cycles: u32,
    /// Every generated battery fails strictly after this cycle.
    pub activation_cycle: u32,
    pub nominal_capacity: f64,
    /// Bounds for the target end of life; derived from `max_cycles` when absent.
    pub life_min: Option<u32>,
    pub life_max: Option<u32>,
    /// Range of the linear fade accumulated by end of life, `a * L`.
    pub linear_fade: (f64, f64),
    /// Range of the knee position as a fraction of `L`.
    pub knee_fraction: (f64, f64),
    /// Range of `c * (L - knee)`.
    pub knee_sharpness: (f64, f64),
    /// Capacity noise standard deviation as a fraction of `q0`.
    pub noise: f64,
    /// Cycles recorded after the end-of-life crossing.
    pub tail_cycles: u32,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            batteries: 40,
            max_cycles: 800,
            activation_cycle: 100,
            nominal_capacity: 1.1,
            life_min: None,
            life_max: None,
            linear_fade: (0.02, 0.08),
            knee_fraction: (0.55, 0.8),
            knee_sharpness: (3.0, 5.0),
            noise: 0.002,
            tail_cycles: 10,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// Effective `(life_min, life_max)`.
    pub fn life_bounds(&self) -> (u32, u32) {
        let lo = self
            .life_min
            .unwrap_or_else(|| (self.activation_cycle + 10).max(self.max_cycles / 4));
        let hi = self
            .life_max
            .unwrap_or((self.max_cycles as f64 * 0.9) as u32)
            .max(lo);
        (lo, hi)
    }

    fn validate(&self) -> Result<()> {
        if self.batteries < 2 {
            return Err(Error::Config(format!(
                "a fleet needs at least 2 batteries, got {}",
                self.batteries
            )));
        }
        let (lo, hi) = self.life_bounds();
        if lo <= self.activation_cycle || hi > self.max_cycles {
            return Err(Error::Config(format!(
                "life range {lo}..={hi} must lie in ({}, {}]",
                self.activation_cycle, self.max_cycles
            )));
        }
        let ranges = [self.linear_fade, self.knee_fraction, self.knee_sharpness];
        if ranges.iter().any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite())
            || self.linear_fade.1 >= 0.2
            || self.knee_fraction.0 <= 0.0
            || self.knee_fraction.1 >= 1.0
            || self.knee_sharpness.0 <= 0.0
        {
            return Err(Error::Config("invalid synthetic fade parameter ranges".into()));
        }
        if !(self.noise >= 0.0) || !(self.nominal_capacity > 0.0) {
            return Err(Error::Config("noise must be >= 0 and capacity > 0".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Draws fade parameters whose clean curve crosses 80% of `q0` at `life`.
pub fn draw_fade_params<R: Rng + ?Sized>(cfg: &SyntheticConfig, life: u32, rng: &mut R) -> FadeParams {
    let life_f = f64::from(life);
    let a = uniform(rng, cfg.linear_fade) / life_f;
    let knee = life_f * uniform(rng, cfg.knee_fraction);
    let sharp = uniform(rng, cfg.knee_sharpness);
    let c = sharp / (life_f - knee);
    let b = (1.0 - END_OF_LIFE_FRACTION - a * life_f) / sharp.exp();
    FadeParams {
        q0: cfg.nominal_capacity,
        a,
        b,
        c,
        knee,
    }
}

/// Generates one trace. The capacity channel is the noisy fade curve and
/// `t_f` is its first crossing below `0.8 * q0`.
pub fn generate_trace<R: Rng + ?Sized>(
    battery_id: &str,
    params: &FadeParams,
    max_cycles: u32,
    noise: f64,
    tail_cycles: u32,
    rng: &mut R,
) -> Result<BatteryTrace> {
    let q0 = params.q0;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let gauss = move |rng: &mut R| -> f64 { normal.sample(rng) };

    let t0 = 30.0 + uniform(rng, (-1.0, 1.0));
    let r0 = uniform(rng, (0.014, 0.018));
    let charge_time0 = uniform(rng, (9.5, 10.5));

    let mut records = Vec::new();
    let mut t_f = None;
    let mut n = 1;
    while n <= max_cycles {
        let clean = params.capacity(n);
        let q = clean + noise * q0 * gauss(rng);
        let fade = ((q0 - clean) / ((1.0 - END_OF_LIFE_FRACTION) * q0)).max(0.0);
        let avg_temp = t0 + 2.5 * fade + 0.15 * gauss(rng);
        let values = vec![
            q,
            clean * (1.002 + 0.004 * fade) + noise * q0 * gauss(rng),
            avg_temp,
            avg_temp - 1.5 - 0.5 * fade + 0.1 * gauss(rng),
            avg_temp + 2.0 + 3.0 * fade * fade + 0.15 * gauss(rng),
            r0 * (1.0 + 0.3 * fade + 0.5 * fade.powi(3)) + 0.0002 * gauss(rng),
            charge_time0 + 1.5 * fade + 0.1 * gauss(rng),
        ];
        records.push(CycleRecord {
            cycle_index: n,
            values,
        });
        if t_f.is_none() && first_eol_crossing(&[q], q0).is_some() {
            t_f = Some(n);
        }
        if let Some(tf) = t_f {
            if n >= tf.saturating_add(tail_cycles) {
                break;
            }
        }
        n += 1;
    }
    let t_f = t_f.ok_or_else(|| {
        Error::Generation(format!(
            "battery {battery_id} never drops below 80% capacity within {max_cycles} cycles"
        ))
    })?;
    Ok(BatteryTrace {
        battery_id: battery_id.to_string(),
        channels: CHANNELS.iter().map(|c| c.to_string()).collect(),
        records,
        t_f,
        nominal_capacity: q0,
    })
}

/// Battery identifiers sort in generation order.
pub fn battery_id(index: usize) -> String {
    format!("B{:04}", index + 1)
}

/// Seed of the per-battery generator.
fn battery_seed(fleet_seed: u64, index: usize) -> u64 {
    fleet_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((index as u64 + 1).wrapping_mul(0xbf58_476d_1ce4_e5b9))
}

const MAX_REDRAWS: usize = 64;

/// Generates a fleet of `cfg.batteries` independent traces.
pub fn generate_synthetic_fleet(cfg: &SyntheticConfig) -> Result<Fleet> {
    cfg.validate()?;
    let (lo, hi) = cfg.life_bounds();
    let mut traces = Vec::with_capacity(cfg.batteries);
    for i in 0..cfg.batteries {
        let id = battery_id(i);
        let mut rng = ChaCha8Rng::seed_from_u64(battery_seed(cfg.seed, i));
        let mut accepted = None;
        for _ in 0..MAX_REDRAWS {
            let life = rng.random_range(lo..=hi);
            let params = draw_fade_params(cfg, life, &mut rng);
            match generate_trace(&id, &params, cfg.max_cycles, cfg.noise, cfg.tail_cycles, &mut rng) {
                Ok(trace) if trace.t_f > cfg.activation_cycle => {
                    accepted = Some(trace);
                    break;
                }
                Ok(_) | Err(Error::Generation(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        let trace = accepted.ok_or_else(|| {
            Error::Generation(format!(
                "battery {id}: no parameter draw reached end of life between cycle {} and {}",
                cfg.activation_cycle, cfg.max_cycles
            ))
        })?;
        traces.push(trace);
    }
    Ok(Fleet::new(traces))
}
