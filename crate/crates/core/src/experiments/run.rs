//! End-to-end experiment runs and their on-disk artifacts.
//!
//! Every variant sees the same split and seeds, so reports are paired.
//! Output files in the bundle directory:
//!
//! - `resolved_config.toml`: the configuration actually used, seeds included
//! - `models_<variant>.json`, `predictions_<variant>.json`, `messages_<variant>.jsonl`
//! - `report_<variant>.json` / `.csv`, `buckets_<variant>.csv`
//! - `report_aprp.json` / `.csv` for the age-based periodic baseline
//! - `comparison.csv`

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::buckets::{bucket_errors, DegradationBucketSummary};
use super::compare::{compare_policies, ComparisonTable};
use super::config::ExperimentConfig;
use crate::data::{
    engineer_features, generate_synthetic_fleet, load_csv, split_train_test, write_file,
    FeatureMatrix, Fleet,
};
use crate::error::{Error, Result};
use crate::federation::{
    run_pipeline, BatteryPredictions, MessageLog, PayloadKind, PipelineMode, Stage,
    TrainedPipeline,
};
use crate::nn::WeightSnapshot;
use crate::policy::{
    evaluate_periodic, evaluate_policy, optimal_periodic_trigger, reports_to_csv,
    retraining_monitor, select_delta, FleetReport, ReplacementEconomics,
};

/// Name used for the periodic baseline in file names and tables.
pub const APRP_NAME: &str = "aprp";

/// Engineered features of the training and test batteries.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Vec<FeatureMatrix>,
    pub test: Vec<FeatureMatrix>,
}

pub fn load_fleet(cfg: &ExperimentConfig) -> Result<Fleet> {
    match &cfg.data.manifest {
        Some(path) => load_csv(path),
        None => generate_synthetic_fleet(&cfg.data.synthetic),
    }
}

/// Loads or generates the fleet, splits it and engineers features.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let run = || -> Result<PreparedData> {
        let fleet = split_train_test(&load_fleet(cfg)?, cfg.data.train_ratio, cfg.data.split_seed)?;
        let features = |traces: Vec<&crate::data::BatteryTrace>| -> Result<Vec<FeatureMatrix>> {
            let mut out = traces
                .par_iter()
                .map(|t| engineer_features(t, &cfg.features))
                .collect::<Result<Vec<_>>>()?;
            out.retain(|fm| {
                if fm.is_empty() {
                    log::warn!("battery {} has no cycles after activation; dropped", fm.battery_id);
                }
                !fm.is_empty()
            });
            out.sort_by(|a, b| a.battery_id.cmp(&b.battery_id));
            Ok(out)
        };
        let data = PreparedData {
            train: features(fleet.train())?,
            test: features(fleet.test())?,
        };
        if data.train.is_empty() || data.test.is_empty() {
            return Err(Error::Config(
                "both splits need at least one battery with eligible cycles".into(),
            ));
        }
        Ok(data)
    };
    run().map_err(|e| e.in_stage("data"))
}

/// Per-variant predictions on both splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBundle {
    pub variant: PipelineMode,
    pub diode_asserted: Option<bool>,
    pub train: Vec<BatteryPredictions>,
    pub test: Vec<BatteryPredictions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenWeights {
    pub checksum: u64,
    pub snapshot: WeightSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub variant: PipelineMode,
    pub target_scale: f64,
    pub encoder: Option<FrozenWeights>,
    pub decoder: Option<FrozenWeights>,
    pub rul: FrozenWeights,
}

impl ModelBundle {
    pub fn from_pipeline(p: &TrainedPipeline) -> Self {
        let w = |m: &crate::federation::FrozenModel| FrozenWeights {
            checksum: m.checksum(),
            snapshot: m.snapshot().clone(),
        };
        Self {
            variant: p.mode,
            target_scale: p.target_scale,
            encoder: p.encoder.as_ref().map(w),
            decoder: p.decoder.as_ref().map(w),
            rul: w(&p.rul),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageSummary {
    pub autoencoder_rounds: usize,
    pub rul_rounds: usize,
    pub weight_payloads: usize,
    pub config_payloads: usize,
    pub raw_row_payloads: usize,
    pub total_bytes: usize,
}

impl MessageSummary {
    pub fn from_log(log: &MessageLog) -> Self {
        Self {
            autoencoder_rounds: log.bytes_per_round(Stage::Autoencoder).len(),
            rul_rounds: log.bytes_per_round(Stage::Rul).len(),
            weight_payloads: log.count(PayloadKind::Weights),
            config_payloads: log.count(PayloadKind::Config),
            raw_row_payloads: log.raw_row_payloads(),
            total_bytes: log.total_bytes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: PipelineMode,
    /// Threshold minimizing the mean cost rate on the training batteries; used for `selected`.
    pub threshold_selected_on_train: f64,
    /// Threshold that would have been best on the test batteries, for reference.
    pub threshold_selected_on_test: f64,
    pub selected: FleetReport,
    pub by_threshold: Vec<FleetReport>,
    pub retraining_requested: bool,
    /// `Some(true)` when no pooling was declared and the message log holds no raw rows.
    pub diode_asserted: Option<bool>,
    pub messages: MessageSummary,
    pub test_mean_abs_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedVariant {
    pub pipeline: TrainedPipeline,
    pub predictions: PredictionBundle,
}

/// Trains one variant and predicts on both splits.
pub fn train_variant(mode: PipelineMode, data: &PreparedData, cfg: &ExperimentConfig) -> Result<TrainedVariant> {
    let stage = format!("train {mode}");
    let run = || -> Result<TrainedVariant> {
        info!("training {mode} on {} batteries", data.train.len());
        let pipeline = run_pipeline(mode, &data.train, &cfg.federation, &cfg.network)?;
        let predictions = PredictionBundle {
            variant: mode,
            diode_asserted: pipeline.diode_asserted,
            train: pipeline.predict(&data.train, cfg.federation.seed)?,
            test: pipeline.predict(&data.test, cfg.federation.seed)?,
        };
        Ok(TrainedVariant {
            pipeline,
            predictions,
        })
    };
    run().map_err(|e| e.in_stage(stage))
}

/// Age-based periodic policy optimized on training failure times and
/// applied to the test batteries. Candidates are every age up to the
/// longest training life.
pub fn periodic_baseline(
    train_failures: &[u32],
    test: &[(String, u32)],
    econ: &ReplacementEconomics,
) -> Result<FleetReport> {
    let longest = train_failures.iter().copied().max().unwrap_or(0);
    let candidates: Vec<u32> = (1..=longest).collect();
    let t_star = optimal_periodic_trigger(train_failures, &candidates, econ)?;
    evaluate_periodic(test, t_star, econ)
}

pub fn periodic_from_predictions(bundle: &PredictionBundle, econ: &ReplacementEconomics) -> Result<FleetReport> {
    let train: Vec<u32> = bundle.train.iter().map(|b| b.t_f).collect();
    let test: Vec<(String, u32)> = bundle.test.iter().map(|b| (b.battery_id.clone(), b.t_f)).collect();
    periodic_baseline(&train, &test, econ)
}

/// Scores a variant's test predictions under every threshold candidate.
pub fn evaluate_variant(
    bundle: &PredictionBundle,
    log: &MessageLog,
    econ: &ReplacementEconomics,
) -> Result<(VariantReport, DegradationBucketSummary)> {
    let run = || -> Result<(VariantReport, DegradationBucketSummary)> {
        let on_train = select_delta(&bundle.train, econ)?;
        let on_test = select_delta(&bundle.test, econ)?;
        let selected = evaluate_policy(&bundle.test, on_train, econ)?;
        let by_threshold = econ
            .delta_candidates
            .iter()
            .map(|&d| evaluate_policy(&bundle.test, d, econ))
            .collect::<Result<Vec<_>>>()?;
        let buckets = bucket_errors(&bundle.test)?;
        let report = VariantReport {
            variant: bundle.variant,
            threshold_selected_on_train: on_train,
            threshold_selected_on_test: on_test,
            retraining_requested: retraining_monitor(&selected, econ.alpha),
            selected,
            by_threshold,
            diode_asserted: bundle.diode_asserted,
            messages: MessageSummary::from_log(log),
            test_mean_abs_error: mean_abs_error(&bundle.test),
        };
        Ok((report, buckets))
    };
    run().map_err(|e| e.in_stage(format!("evaluate {}", bundle.variant)))
}

/// Mean absolute RUL error in cycles over all test rows.
pub fn mean_abs_error(predictions: &[BatteryPredictions]) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for bp in predictions {
        for (&k, &p) in bp.cycles.iter().zip(&bp.predicted) {
            total += (p - f64::from(bp.t_f - k)).abs();
            n += 1;
        }
    }
    (n > 0).then(|| total / n as f64)
}

/// Comparison of the periodic baseline against each variant's selected report.
pub fn comparison_table(periodic: &FleetReport, reports: &[VariantReport]) -> Result<ComparisonTable> {
    let mut named = vec![(APRP_NAME.to_string(), periodic.clone())];
    named.extend(reports.iter().map(|r| (r.variant.to_string(), r.selected.clone())));
    compare_policies(&named)
}

#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub trained: TrainedVariant,
    pub report: VariantReport,
    pub buckets: DegradationBucketSummary,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub periodic: FleetReport,
    pub variants: Vec<VariantOutcome>,
    pub comparison: ComparisonTable,
}

impl ExperimentOutcome {
    pub fn variant(&self, mode: PipelineMode) -> Option<&VariantOutcome> {
        self.variants.iter().find(|v| v.report.variant == mode)
    }
}

/// Runs every configured variant sequentially on one shared split. Writes nothing.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let train_failures: Vec<u32> = data.train.iter().map(|f| f.t_f).collect();
    let test_ids: Vec<(String, u32)> = data.test.iter().map(|f| (f.battery_id.clone(), f.t_f)).collect();
    let periodic = periodic_baseline(&train_failures, &test_ids, &cfg.economics)
        .map_err(|e| e.in_stage("periodic baseline"))?;
    let mut variants = Vec::new();
    for mode in cfg.variants()? {
        let trained = train_variant(mode, &data, cfg)?;
        let (report, buckets) = evaluate_variant(&trained.predictions, &trained.pipeline.log, &cfg.economics)?;
        variants.push(VariantOutcome {
            trained,
            report,
            buckets,
        });
    }
    let reports: Vec<VariantReport> = variants.iter().map(|v| v.report.clone()).collect();
    let comparison = comparison_table(&periodic, &reports)?;
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        periodic,
        variants,
        comparison,
    })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn artifact_path(dir: &Path, prefix: &str, name: &str, ext: &str) -> PathBuf {
    dir.join(format!("{prefix}_{name}.{ext}"))
}

pub fn write_resolved_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&dir.join("resolved_config.toml"), cfg.to_toml()?.as_bytes())
}

pub fn write_training_artifacts(dir: &Path, trained: &TrainedVariant) -> Result<()> {
    ensure_dir(dir)?;
    let name = trained.pipeline.mode.to_string();
    write_file(
        &artifact_path(dir, "models", &name, "json"),
        &to_json(&ModelBundle::from_pipeline(&trained.pipeline)),
    )?;
    write_file(&artifact_path(dir, "predictions", &name, "json"), &to_json(&trained.predictions))?;
    write_file(
        &artifact_path(dir, "messages", &name, "jsonl"),
        trained.pipeline.log.to_jsonl().as_bytes(),
    )
}

pub fn read_predictions(dir: &Path, mode: PipelineMode) -> Result<PredictionBundle> {
    read_json(&artifact_path(dir, "predictions", &mode.to_string(), "json"))
}

pub fn read_messages(dir: &Path, mode: PipelineMode) -> Result<MessageLog> {
    let path = artifact_path(dir, "messages", &mode.to_string(), "jsonl");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    MessageLog::from_jsonl(&text)
}

pub fn write_periodic_report(dir: &Path, periodic: &FleetReport) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&artifact_path(dir, "report", APRP_NAME, "json"), &to_json(periodic))?;
    write_file(
        &artifact_path(dir, "report", APRP_NAME, "csv"),
        reports_to_csv(std::slice::from_ref(periodic)).as_bytes(),
    )
}

pub fn read_periodic_report(dir: &Path) -> Result<FleetReport> {
    read_json(&artifact_path(dir, "report", APRP_NAME, "json"))
}

pub fn write_variant_report(dir: &Path, report: &VariantReport, buckets: &DegradationBucketSummary) -> Result<()> {
    ensure_dir(dir)?;
    let name = report.variant.to_string();
    write_file(&artifact_path(dir, "report", &name, "json"), &to_json(report))?;
    write_file(
        &artifact_path(dir, "report", &name, "csv"),
        reports_to_csv(&report.by_threshold).as_bytes(),
    )?;
    write_file(&artifact_path(dir, "buckets", &name, "csv"), buckets.to_csv().as_bytes())
}

pub fn read_variant_report(path: &Path) -> Result<VariantReport> {
    read_json(path)
}

/// Reads every `report_<variant>.json` in `dir`, ordered by file name.
pub fn read_variant_reports(dir: &Path) -> Result<Vec<VariantReport>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| {
                n.starts_with("report_") && n.ends_with(".json") && n != format!("report_{APRP_NAME}.json")
            })
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_variant_report(p)).collect()
}

pub fn write_comparison(dir: &Path, table: &ComparisonTable) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join("comparison.csv");
    write_file(&path, table.to_csv().as_bytes())?;
    Ok(path)
}

/// Writes the whole bundle for a finished experiment.
pub fn write_outcome(dir: &Path, outcome: &ExperimentOutcome) -> Result<()> {
    write_resolved_config(dir, &outcome.config)?;
    write_periodic_report(dir, &outcome.periodic)?;
    for v in &outcome.variants {
        write_training_artifacts(dir, &v.trained)?;
        write_variant_report(dir, &v.report, &v.buckets)?;
    }
    write_comparison(dir, &outcome.comparison)?;
    Ok(())
}
