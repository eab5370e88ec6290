//! End-to-end experiment runs, artifact determinism and report arithmetic.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use fedprog::experiments::{
    bucket_errors, compare_policies, improvement, run_experiment, write_outcome, ExperimentConfig,
    COMPARISON_ROWS, IMPROVEMENT_ROW,
};
use fedprog::federation::{BatteryPredictions, PipelineMode};
use fedprog::policy::{evaluate_periodic, ReplacementEconomics};

fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.data.synthetic.batteries = 6;
    cfg.data.synthetic.max_cycles = 150;
    cfg.experiment.variants = vec!["fully-federated".into()];
    cfg
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn tiny_fleet_runs_quickly_and_reruns_byte_identically() {
    let cfg = tiny_config();
    let start = Instant::now();
    let outcome = run_experiment(&cfg).unwrap();
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_outcome(a.path(), &outcome).unwrap();
    write_outcome(b.path(), &run_experiment(&cfg).unwrap()).unwrap();
    let files_a = read_dir_bytes(a.path());
    for name in [
        "report_fully-federated.json",
        "report_fully-federated.csv",
        "buckets_fully-federated.csv",
        "messages_fully-federated.jsonl",
        "comparison.csv",
        "resolved_config.toml",
    ] {
        assert!(files_a.contains_key(name), "missing {name}");
    }
    assert_eq!(files_a, read_dir_bytes(b.path()));

    let v = outcome.variant(PipelineMode::FullyFederated).unwrap();
    assert_eq!(v.report.diode_asserted, Some(true));
    assert_eq!(v.report.messages.raw_row_payloads, 0);
    assert_eq!(v.report.by_threshold.len(), 4);
}

#[test]
fn variants_share_the_same_split() {
    let mut cfg = tiny_config();
    cfg.federation.rounds_autoencoder = 2;
    cfg.federation.rounds_rul = 2;
    cfg.experiment.variants = vec!["fully-federated".into(), "fully-centralized".into()];
    let outcome = run_experiment(&cfg).unwrap();
    let ids = |m| {
        let v = outcome.variant(m).unwrap();
        v.trained.predictions.test.iter().map(|b| b.battery_id.clone()).collect::<Vec<_>>()
    };
    assert_eq!(ids(PipelineMode::FullyFederated), ids(PipelineMode::FullyCentralized));
    let central = outcome.variant(PipelineMode::FullyCentralized).unwrap();
    assert_eq!(central.report.diode_asserted, None);
    assert!(central.report.messages.raw_row_payloads > 0);
}

#[test]
fn missing_csv_aborts_at_load_with_the_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("manifest.txt"), "gone.csv\n").unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "[data]\nmanifest = \"manifest.txt\"\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&dir.path().join("cfg.toml")).unwrap();
    let err = run_experiment(&cfg).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("gone.csv"), "{msg}");
    assert!(msg.contains("data"), "{msg}");
    assert!(err.is_user_error());
}

#[test]
fn missing_manifest_is_reported_at_config_load() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), "[data]\nmanifest = \"nowhere.txt\"\n").unwrap();
    let err = ExperimentConfig::load(&dir.path().join("cfg.toml")).unwrap_err();
    assert!(err.to_string().contains("nowhere.txt"), "{err}");
}

#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["quick.toml", "desk.toml"] {
        let cfg = ExperimentConfig::load(&root.join(name)).unwrap();
        assert!(!cfg.variants().unwrap().is_empty(), "{name}");
    }
}

#[test]
fn with_seed_changes_only_seeds_and_round_trips_through_toml() {
    let base = ExperimentConfig::default();
    let seeded = base.clone().with_seed(u64::MAX);
    assert_ne!(seeded.federation.seed, base.federation.seed);
    assert_eq!(seeded.federation.rounds_rul, base.federation.rounds_rul);
    assert_eq!(ExperimentConfig::from_toml(&seeded.to_toml().unwrap()).unwrap(), seeded);
}

#[test]
fn ground_truth_predictions_give_zero_error_in_every_bucket() {
    let features = common::synthetic_features(12, 800, 1);
    let truth: Vec<BatteryPredictions> = features
        .iter()
        .map(|fm| BatteryPredictions {
            battery_id: fm.battery_id.clone(),
            t_f: fm.t_f,
            cycles: fm.cycles.clone(),
            predicted: fm.targets.clone(),
        })
        .collect();
    let summary = bucket_errors(&truth).unwrap();
    assert_eq!(summary.buckets.len(), 9);
    assert!(summary.buckets.iter().filter(|b| b.count > 0).count() >= 8);
    for b in summary.buckets.iter().filter(|b| b.count > 0) {
        assert_eq!(b.mean, Some(0.0));
        assert_eq!(b.mean_abs, Some(0.0));
    }
}

#[test]
fn comparison_arithmetic_and_labels() {
    assert_eq!((100.0 * improvement(20.3, 12.6)).round(), 38.0);
    assert_eq!((100.0 * improvement(32.5, 25.7)).round(), 21.0);
    let e = ReplacementEconomics::default();
    let fleet = [("a".to_string(), 200), ("b".to_string(), 260)];
    let a = evaluate_periodic(&fleet, 150, &e).unwrap();
    let b = evaluate_periodic(&fleet, 190, &e).unwrap();
    let t = compare_policies(&[("a".into(), a.clone()), ("b".into(), b.clone())]).unwrap();
    let expected = (a.mean_cost_rate - b.mean_cost_rate) / a.mean_cost_rate;
    assert_eq!(t.improvements, vec![0.0, expected]);
    let csv = t.to_csv();
    let labels: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let mut want: Vec<&str> = COMPARISON_ROWS.to_vec();
    want.push(IMPROVEMENT_ROW);
    assert_eq!(labels, want);
}
