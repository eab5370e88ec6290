//! End-to-end studies: fleet preparation, every pipeline variant on one
//! shared split, periodic and predictive policy evaluation, degradation
//! bucket summaries and comparison tables.

mod buckets;
mod compare;
mod config;
mod run;

pub use buckets::{bucket_errors, life_bucket, quantile, BucketStats, DegradationBucketSummary};
pub use compare::{compare_policies, improvement, ComparisonTable, COMPARISON_ROWS, IMPROVEMENT_ROW};
pub use config::{DataConfig, ExperimentConfig, RunConfig};
pub use run::{
    artifact_path, comparison_table, evaluate_variant, load_fleet, mean_abs_error,
    periodic_baseline, periodic_from_predictions, prepare_data, read_messages,
    read_periodic_report, read_predictions, read_variant_report, read_variant_reports,
    run_experiment, train_variant, write_comparison, write_outcome, write_periodic_report,
    write_resolved_config, write_training_artifacts, write_variant_report, ExperimentOutcome,
    FrozenWeights, MessageSummary, ModelBundle, PredictionBundle, PreparedData, TrainedVariant,
    VariantOutcome, VariantReport, APRP_NAME,
};
