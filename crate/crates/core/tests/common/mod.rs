//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use fedprog::data::{engineer_features, generate_synthetic_fleet, FeatureConfig, FeatureMatrix, SyntheticConfig};
use fedprog::federation::{client_seed, init_seed, round_seed, ArchitectureConfig, FederationConfig, Stage};
use fedprog::nn::{
    mse_loss, train_autoencoder, train_regression, Activation, DenseNetwork, Matrix, WeightSnapshot,
};
use fedprog::policy::ReplacementEconomics;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Engineered feature matrices of a seeded synthetic fleet.
pub fn synthetic_features(batteries: usize, max_cycles: u32, seed: u64) -> Vec<FeatureMatrix> {
    let cfg = SyntheticConfig {
        batteries,
        max_cycles,
        seed,
        ..SyntheticConfig::default()
    };
    let fleet = generate_synthetic_fleet(&cfg).expect("synthetic fleet");
    let fc = FeatureConfig::default();
    fleet
        .traces
        .iter()
        .map(|t| engineer_features(t, &fc).expect("features"))
        .collect()
}

/// A small random network with relu hidden layers and either output activation.
pub fn random_network(rng: &mut ChaCha8Rng) -> DenseNetwork {
    let depth = rng.random_range(1..=4);
    let dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=6)).collect();
    let mut acts = vec![Activation::Relu; depth - 1];
    acts.push(if rng.random_bool(0.5) { Activation::Linear } else { Activation::Relu });
    let mut net = DenseNetwork::zeros(&dims, &acts).unwrap();
    for p in net.params_mut() {
        *p = rng.random_range(-1.0..1.0);
    }
    net
}

fn loss_of(net: &DenseNetwork, x: &Matrix, y: &Matrix) -> f64 {
    mse_loss(&net.predict(x).unwrap(), y).unwrap().0
}

/// Largest violation of `|analytic - numeric| <= rel * max(|a|, |n|) + abs`
/// over every parameter, as a ratio (`<= 1` passes). Uses central differences.
pub fn gradient_check(seed: u64, rel: f64, abs: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = random_network(&mut rng);
    let rows = rng.random_range(1..=5);
    let x = Matrix::from_vec(
        rows,
        net.input_dim(),
        (0..rows * net.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .unwrap();
    let y = Matrix::from_vec(
        rows,
        net.output_dim(),
        (0..rows * net.output_dim()).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .unwrap();
    let cache = net.forward_cached(&x).unwrap();
    let (_, dl) = mse_loss(cache.output(), &y).unwrap();
    let analytic = net.backward(&cache, &dl).unwrap().params;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..net.param_count() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = loss_of(&net, &x, &y);
        net.params_mut()[i] = orig - h;
        let down = loss_of(&net, &x, &y);
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let allowed = rel * a.abs().max(numeric.abs()) + abs;
        worst = worst.max((a - numeric).abs() / allowed);
    }
    worst
}

/// Direct transcription of the per-battery cost, unused life and unavailable
/// days rules. `None` for unused life when the outcome is corrective.
pub fn brute_force_outcome(
    t_star: Option<u32>,
    t_f: u32,
    econ: &ReplacementEconomics,
) -> (f64, Option<i64>, u32) {
    let (t_c, t_m) = (econ.t_c as i64, econ.t_m as i64);
    let t_f_i = t_f as i64;
    match t_star {
        Some(t) if (t as i64) + t_c < t_f_i => {
            let cost = econ.c_r / ((t as i64 + t_c) as f64);
            let unused = t_f_i - (t as i64 + t_c + t_m);
            (cost, Some(unused), t_m as u32)
        }
        Some(t) if (t as i64) < t_f_i => {
            let cost = econ.c_f / t_f as f64;
            let down = (t_c + t_m) - (t_f_i - t as i64);
            (cost, None, down as u32)
        }
        _ => (econ.c_f / t_f as f64, None, (t_c + t_m) as u32),
    }
}

/// Exhaustive argmin of summed cost rate over candidates, first minimum wins.
pub fn brute_force_periodic(failure_times: &[u32], candidates: &[u32], econ: &ReplacementEconomics) -> u32 {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    let totals: Vec<f64> = sorted
        .iter()
        .map(|&t| {
            failure_times
                .iter()
                .map(|&t_f| brute_force_outcome(Some(t), t_f, econ).0)
                .sum()
        })
        .collect();
    let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
    sorted[totals.iter().position(|&c| c == min).unwrap()]
}

/// Elementwise mean computed left to right in the given order, then divided by K.
pub fn elementwise_mean(snapshots: &[&WeightSnapshot]) -> Vec<f64> {
    let n = snapshots[0].len();
    (0..n)
        .map(|j| {
            let mut s = snapshots[0].values()[j];
            for snap in &snapshots[1..] {
                s += snap.values()[j];
            }
            s / snapshots.len() as f64
        })
        .collect()
}

/// Trains one client's data with plain local loops that mirror what a
/// single-client federation with `data_ratio = 1` must do, round by round.
/// Returns `(encoder, decoder, rul)` snapshots.
pub fn local_oracle(
    fm: &FeatureMatrix,
    fed: &FederationConfig,
    arch: &ArchitectureConfig,
) -> (WeightSnapshot, WeightSnapshot, WeightSnapshot) {
    let (x, _) = fedprog::data::normalize(&fm.features, None).unwrap();
    let d_in = x.cols();
    let mut init = ChaCha8Rng::seed_from_u64(init_seed(fed.seed));
    let mut enc = DenseNetwork::regression(&arch.encoder_dims(d_in), &mut init).unwrap();
    let mut dec = DenseNetwork::regression(&arch.decoder_dims(d_in), &mut init).unwrap();
    let mut rul = DenseNetwork::regression(&arch.rul_dims(arch.bottleneck), &mut init).unwrap();
    let cs = client_seed(fed.seed, &fm.battery_id);
    let tc = fed.train_config();
    for round in 0..fed.rounds_autoencoder {
        let mut rng = ChaCha8Rng::seed_from_u64(round_seed(cs, Stage::Autoencoder, round));
        train_autoencoder(&mut enc, &mut dec, &x, &tc, &mut rng).unwrap();
    }
    let z = enc.predict(&x).unwrap();
    let y = Matrix::column(&fm.targets.iter().map(|t| t / arch.target_scale).collect::<Vec<_>>());
    for round in 0..fed.rounds_rul {
        let mut rng = ChaCha8Rng::seed_from_u64(round_seed(cs, Stage::Rul, round));
        train_regression(&mut rul, &z, &y, &tc, &mut rng).unwrap();
    }
    (enc.snapshot(), dec.snapshot(), rul.snapshot())
}

/// Small federation settings for fast tests.
pub fn small_federation(rounds_ae: u32, rounds_rul: u32, clients: usize, ratio: f64) -> FederationConfig {
    FederationConfig {
        rounds_autoencoder: rounds_ae,
        rounds_rul,
        clients_per_round: clients,
        data_ratio: ratio,
        local_epochs: 1,
        batch_size: 32,
        seed: 5,
        ..FederationConfig::default()
    }
}

/// Narrow networks for fast tests.
pub fn small_architecture() -> ArchitectureConfig {
    ArchitectureConfig {
        bottleneck: 8,
        encoder_hidden: Some(12),
        rul_hidden: vec![16, 8],
        target_scale: 100.0,
    }
}

/// The same battery with every row repeated twice.
pub fn doubled_rows(fm: &FeatureMatrix) -> FeatureMatrix {
    FeatureMatrix {
        features: Matrix::vstack([&fm.features, &fm.features]).unwrap(),
        targets: fm.targets.iter().chain(&fm.targets).copied().collect(),
        cycles: fm.cycles.iter().chain(&fm.cycles).copied().collect(),
        ..fm.clone()
    }
}

/// Trains a one-battery federation with `data_ratio = 1` and compares every
/// frozen snapshot bit for bit with [`local_oracle`].
pub fn single_client_degeneracy(seed: u64) -> bool {
    use fedprog::federation::{run_pipeline, PipelineMode};
    let fm = synthetic_features(2, 300, seed).remove(0);
    let fed = FederationConfig {
        local_epochs: 2,
        seed,
        ..small_federation(3, 4, 1, 1.0)
    };
    let arch = small_architecture();
    let trained = run_pipeline(PipelineMode::FullyFederated, std::slice::from_ref(&fm), &fed, &arch).unwrap();
    let (enc, dec, rul) = local_oracle(&fm, &fed, &arch);
    trained.encoder.as_ref().unwrap().snapshot().bit_eq(&enc)
        && trained.decoder.as_ref().unwrap().snapshot().bit_eq(&dec)
        && trained.rul.snapshot().bit_eq(&rul)
}
