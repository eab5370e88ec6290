use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trace::{Fleet, Split};
use crate::error::{Error, Result};

/// Number of training batteries: `round(ratio * n)`, kept within `1..n`.
pub fn train_count(n: usize, ratio: f64) -> usize {
    let k = (ratio * n as f64).round() as usize;
    k.clamp(1, n - 1)
}

/// Battery-level seeded split: shuffles the fleet order and assigns the
/// first `train_count` batteries to training.
pub fn split_train_test(fleet: &Fleet, ratio: f64, seed: u64) -> Result<Fleet> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("train ratio {ratio} must lie in (0, 1)")));
    }
    let n = fleet.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "cannot split a fleet of {n} batteries"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = train_count(n, ratio);
    let mut assignment = vec![Split::Test; n];
    for &i in &order[..n_train] {
        assignment[i] = Split::Train;
    }
    Ok(Fleet {
        traces: fleet.traces.clone(),
        assignment: Some(assignment),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{generate_synthetic_fleet, SyntheticConfig};

    fn fleet(n: usize) -> Fleet {
        generate_synthetic_fleet(&SyntheticConfig {
            batteries: n,
            max_cycles: 300,
            ..SyntheticConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn four_batteries_three_quarters() {
        let f = split_train_test(&fleet(4), 0.75, 1).unwrap();
        assert_eq!(f.train().len(), 3);
        assert_eq!(f.test().len(), 1);
    }

    #[test]
    fn two_batteries_half() {
        let f = split_train_test(&fleet(2), 0.5, 1).unwrap();
        assert_eq!((f.train().len(), f.test().len()), (1, 1));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let base = fleet(10);
        let a = split_train_test(&base, 0.75, 5).unwrap();
        let b = split_train_test(&base, 0.75, 5).unwrap();
        assert_eq!(a.assignment, b.assignment);
        let train: Vec<_> = a.train().iter().map(|t| t.battery_id.clone()).collect();
        assert!(a.test().iter().all(|t| !train.contains(&t.battery_id)));
        assert_eq!(a.train().len() + a.test().len(), 10);
    }

    #[test]
    fn rejects_tiny_fleet_and_bad_ratio() {
        let mut one = fleet(2);
        one.traces.truncate(1);
        assert!(split_train_test(&one, 0.5, 0).is_err());
        assert!(split_train_test(&fleet(2), 1.0, 0).is_err());
    }
}
