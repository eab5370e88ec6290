//! Dense network, optimizer and training-loop properties.

mod common;

use fedprog::nn::{
    mse, train_regression, AdamConfig, AdamState, DenseNetwork, Matrix, TrainConfig, WeightSnapshot,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_finite_differences_on_many_networks() {
    for seed in 0..40 {
        let worst = common::gradient_check(seed, 1e-4, 1e-7);
        assert!(worst <= 1.0, "seed {seed}: violation ratio {worst}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>()) {
        let worst = common::gradient_check(seed, 1e-4, 1e-7);
        prop_assert!(worst <= 1.0, "violation ratio {}", worst);
    }

    #[test]
    fn snapshot_restore_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = common::random_network(&mut rng);
        let snap = net.snapshot();
        let mut other = DenseNetwork::zeros(net.layer_dims(), net.activations()).unwrap();
        other.restore(&snap).unwrap();
        prop_assert!(other.snapshot().bit_eq(&snap));
        prop_assert_eq!(snap.checksum(), other.snapshot().checksum());
    }
}

#[test]
fn snapshot_rejects_wrong_shape() {
    assert!(WeightSnapshot::new(vec![0.0; 5], vec![(2, 2)]).is_err());
    let mut net = DenseNetwork::regression_zeros(&[2, 3, 1]).unwrap();
    let other = DenseNetwork::regression_zeros(&[3, 2, 1]).unwrap();
    assert!(net.restore(&other.snapshot()).is_err());
}

#[test]
fn adam_first_step_moves_each_weight_by_learning_rate() {
    // with bias correction the first update is lr * g / (|g| + eps')
    let cfg = AdamConfig::default();
    let mut state = AdamState::new(3, cfg).unwrap();
    let mut w = vec![1.0, -2.0, 0.5];
    state.step(&mut w, &[0.3, -4.0, 1e-3]).unwrap();
    for (after, (before, g)) in w.iter().zip([(1.0, 0.3), (-2.0, -4.0), (0.5, 1e-3)]) {
        let expected = before - cfg.lr * g / ((g * g).sqrt() + cfg.epsilon);
        assert!((after - expected).abs() < 1e-12, "{after} vs {expected}");
    }
}

#[test]
fn adam_rejects_invalid_hyperparameters() {
    let bad = AdamConfig { beta1: 1.0, ..AdamConfig::default() };
    assert!(AdamState::new(1, bad).is_err());
}

fn regression_problem(seed: u64) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<[f64; 3]> = (0..64).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let ys: Vec<[f64; 1]> = xs.iter().map(|x| [x[0] - 2.0 * x[1] * x[2] + 0.3]).collect();
    (Matrix::from_rows(&xs).unwrap(), Matrix::from_rows(&ys).unwrap())
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let (x, y) = regression_problem(1);
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = DenseNetwork::regression(&[3, 16, 8, 1], &mut rng).unwrap();
        let before = mse(&net.predict(&x).unwrap(), &y).unwrap();
        let cfg = TrainConfig {
            epochs: 150,
            batch_size: 16,
            adam: AdamConfig { lr: 0.01, ..AdamConfig::default() },
        };
        train_regression(&mut net, &x, &y, &cfg, &mut rng).unwrap();
        (before, mse(&net.predict(&x).unwrap(), &y).unwrap(), net.snapshot())
    };
    let (before, after, a) = run();
    let (_, _, b) = run();
    assert!(after * 5.0 < before, "before {before}, after {after}");
    assert!(a.bit_eq(&b));
}

#[test]
fn zero_epochs_leave_weights_untouched() {
    let (x, y) = regression_problem(2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = DenseNetwork::regression(&[3, 4, 1], &mut rng).unwrap();
    let before = net.snapshot();
    let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
    assert_eq!(train_regression(&mut net, &x, &y, &cfg, &mut rng).unwrap(), 0.0);
    assert!(net.snapshot().bit_eq(&before));
}

#[test]
fn shape_mismatches_are_errors() {
    let net = DenseNetwork::regression_zeros(&[3, 2, 1]).unwrap();
    assert!(net.predict(&Matrix::zeros(2, 4)).is_err());
    assert!(DenseNetwork::regression_zeros(&[3]).is_err());
    assert!(DenseNetwork::regression_zeros(&[3, 0, 1]).is_err());
}

#[test]
fn divergent_training_is_a_numeric_error() {
    let (x, mut y) = regression_problem(5);
    y.as_mut_slice().iter_mut().for_each(|v| *v *= 1e200);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut net = DenseNetwork::regression(&[3, 8, 1], &mut rng).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 8,
        adam: AdamConfig { lr: 1e10, ..AdamConfig::default() },
    };
    let err = train_regression(&mut net, &x, &y, &cfg, &mut rng).unwrap_err();
    assert!(matches!(err, fedprog::Error::Numeric(_)), "{err}");
}
