//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage, configuration, input or missing
//! artifact errors, 3 for runtime failures during training or evaluation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{generate_synthetic_fleet, write_fleet_csv, SyntheticConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    comparison_table, compare_policies, evaluate_variant, periodic_from_predictions,
    prepare_data, read_messages, read_periodic_report, read_predictions, read_variant_reports,
    train_variant, write_comparison, write_periodic_report, write_resolved_config,
    write_training_artifacts, write_variant_report, ExperimentConfig, VariantReport,
};
use crate::federation::PipelineMode;
use crate::policy::FleetReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FEDPROG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fedprog", version, about = "Federated battery prognosis simulator and replacement-policy evaluator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic fleet as per-battery CSV files plus a manifest.
    GenData(GenDataArgs),
    /// Train the configured pipeline variants and save models, predictions and message logs.
    Train(TrainArgs),
    /// Score saved predictions under the predictive and periodic replacement policies.
    Evaluate(EvaluateArgs),
    /// Compare two or more saved reports side by side.
    Compare(CompareArgs),
    /// Render comparison.csv for a finished output directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub batteries: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 800)]
    pub max_cycles: u32,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Restrict to these variants (repeatable); defaults to the config's list.
    #[arg(long = "variant")]
    pub variants: Vec<String>,
    /// Output directory; defaults to the config's `experiment.output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the long-run profile: more rounds and a larger synthetic fleet.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Threshold candidates, overriding `economics.delta_candidates`.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report files (`report_<name>.json`); the first is the baseline.
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub dir: PathBuf,
}

fn resolve(run: &RunArgs) -> Result<(ExperimentConfig, Vec<PipelineMode>, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&run.config)?;
    if run.paper_scale {
        cfg = cfg.paper_scale();
    }
    if !run.variants.is_empty() {
        cfg.experiment.variants = run.variants.clone();
    }
    cfg.validate()?;
    let out = run.out.clone().unwrap_or_else(|| cfg.experiment.output_dir.clone());
    cfg.experiment.output_dir = out.clone();
    Ok((cfg.clone(), cfg.variants()?, out))
}

fn gen_data(args: &GenDataArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        batteries: args.batteries as usize,
        max_cycles: args.max_cycles,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    let fleet = generate_synthetic_fleet(&cfg)?;
    let manifest = write_fleet_csv(&fleet, &args.out)?;
    println!("wrote {} batteries; manifest {}", fleet.len(), manifest.display());
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let (cfg, variants, out) = resolve(&args.run)?;
    write_resolved_config(&out, &cfg)?;
    let data = prepare_data(&cfg)?;
    for mode in variants {
        let trained = train_variant(mode, &data, &cfg)?;
        write_training_artifacts(&out, &trained)?;
        let log = &trained.pipeline.log;
        println!(
            "{mode}: {} autoencoder rounds, {} RUL rounds, {} weight payloads, {} raw-row payloads",
            log.bytes_per_round(crate::federation::Stage::Autoencoder).len(),
            log.bytes_per_round(crate::federation::Stage::Rul).len(),
            log.count(crate::federation::PayloadKind::Weights),
            log.raw_row_payloads(),
        );
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let (mut cfg, variants, out) = resolve(&args.run)?;
    if let Some(t) = &args.thresholds {
        cfg.economics.delta_candidates = t.clone();
        cfg.economics.validate()?;
    }
    let mut periodic_written = false;
    for mode in variants {
        let bundle = read_predictions(&out, mode)?;
        let log = read_messages(&out, mode)?;
        if !periodic_written {
            write_periodic_report(&out, &periodic_from_predictions(&bundle, &cfg.economics)?)?;
            periodic_written = true;
        }
        let (report, buckets) = evaluate_variant(&bundle, &log, &cfg.economics)?;
        write_variant_report(&out, &report, &buckets)?;
        println!(
            "{mode}: threshold {} (train-selected), mean cost rate {:.6}, {} preventive / {} corrective",
            report.threshold_selected_on_train,
            report.selected.mean_cost_rate,
            report.selected.n_preventive,
            report.selected.n_corrective
        );
    }
    Ok(())
}

/// Loads either a variant report (its selected policy) or a plain fleet report.
fn load_any_report(path: &Path) -> Result<FleetReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(v) = serde_json::from_str::<VariantReport>(&text) {
        return Ok(v.selected);
    }
    FleetReport::from_json(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::parse(path.display().to_string(), line, message),
        other => other,
    })
}

fn report_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    stem.strip_prefix("report_").unwrap_or(stem).to_string()
}

fn compare(args: &CompareArgs) -> Result<()> {
    let named = args
        .reports
        .iter()
        .map(|p| Ok((report_name(p), load_any_report(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let table = compare_policies(&named)?;
    match &args.out {
        Some(path) => crate::data::write_file(path, table.to_csv().as_bytes())?,
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let periodic = read_periodic_report(&args.dir)?;
    let reports = read_variant_reports(&args.dir)?;
    if reports.is_empty() {
        return Err(Error::io(
            &args.dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no variant reports; run `evaluate` first"),
        ));
    }
    let table = comparison_table(&periodic, &reports)?;
    let path = write_comparison(&args.dir, &table)?;
    print!("{}", table.to_csv());
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Runs a parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::Report(a) => report(a),
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_user_error() {
        EXIT_USER
    } else {
        EXIT_RUNTIME
    }
}

/// Caps the global worker pool from [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure {n} worker threads: {e}")))
}
