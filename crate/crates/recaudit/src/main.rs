//! `recaudit`: audit recommender systems for miscalibration, bias and
//! stereotype, and run the oversampling mitigation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 parse or
//! artifact error, 3 empty data after filtering, 4 training failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use recaudit::audit::{self, AuditReport};
use recaudit::config::RunConfig;
use recaudit::data::{self, snapshot};
use recaudit::error::Error;
use recaudit::mitigate;
use recaudit::models::{self, ModelKind};
use recaudit::toy;

#[derive(Parser)]
#[command(
    name = "recaudit",
    version,
    about = "Recommender-system calibration, bias and stereotype audits"
)]
struct Cli {
    /// Flat key=value config file; CLI flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra config overrides as key=value (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw data, apply preprocessing, write a dataset snapshot.
    Prepare(PrepareArgs),
    /// Train a model on a snapshot and export the full audit report.
    Audit(AuditArgs),
    /// Run the oversampling mitigation over a grid of base rates.
    Mitigate(MitigateArgs),
    /// Re-export or summarize an existing report file.
    Report(ReportArgs),
    /// Write the bundled synthetic toy dataset.
    Toy(ToyArgs),
}

#[derive(Args)]
struct PrepareArgs {
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    movies: Option<PathBuf>,
    #[arg(long)]
    users: Option<PathBuf>,
    /// Snapshot output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    /// Snapshot directory produced by `prepare`.
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report files.
    #[arg(long)]
    out: PathBuf,
    /// tsv, json or both.
    #[arg(long, default_value = "both")]
    format: String,
    /// Also write a binary model checkpoint here.
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Args)]
struct MitigateArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Single base oversampling rate.
    #[arg(long)]
    b: Option<f64>,
    /// Comma-separated grid of base rates (overrides --b).
    #[arg(long)]
    b_grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Existing report.json.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "tsv")]
    format: String,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion
            {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidRatio(_)
        | Error::RateOutOfRange(_)
        | Error::NoInverseStereotyped => 1,
        Error::MalformedLine { .. }
        | Error::Io { .. }
        | Error::Checkpoint(_)
        | Error::Report(_)
        | Error::Json(_)
        | Error::ConfigHashMismatch { .. } => 2,
        Error::EmptyAfterFilter | Error::NoTrainingHistory(_) => 3,
        Error::DivergedTraining(_)
        | Error::SingularSystem(_)
        | Error::UnknownUser(_)
        | Error::EmptyList(_)
        | Error::Measure(_) => 4,
    }
}

fn load_config(cli_config: &Option<PathBuf>, sets: &[String]) -> Result<RunConfig, Error> {
    let mut cfg = match cli_config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for pair in sets {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(Error::Config(format!(
                "--set expects key=value, got {pair:?}"
            )));
        };
        cfg.set(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = load_config(&cli.config, &cli.sets)?;
    match cli.command {
        Command::Prepare(args) => {
            if let Some(p) = args.ratings {
                cfg.ratings_path = p;
            }
            if let Some(p) = args.movies {
                cfg.movies_path = p;
            }
            if let Some(p) = args.users {
                cfg.users_path = p;
            }
            cfg.validate()?;
            prepare(&cfg, &args.out)
        }
        Command::Audit(args) => {
            if let Some(m) = args.model {
                cfg.model = ModelKind::parse(&m)?;
            }
            if let Some(k) = args.k {
                cfg.k = k;
            }
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            run_audit(
                &cfg,
                &args.snapshot,
                &args.out,
                &args.format,
                args.save_model.as_deref(),
            )
        }
        Command::Mitigate(args) => {
            if let Some(m) = args.model {
                cfg.model = ModelKind::parse(&m)?;
            }
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            let grid = parse_grid(&args.b_grid, args.b, cfg.base_rate)?;
            cfg.validate()?;
            run_mitigate(&cfg, &args.snapshot, &args.out, &grid)
        }
        Command::Report(args) => run_report(&args.report, &args.out, &args.format),
        Command::Toy(args) => {
            toy::write_toy_dataset(&args.out).map_err(|e| Error::io(&args.out, e))?;
            println!("toy dataset written to {}", args.out.display());
            Ok(())
        }
    }
}

fn parse_grid(b_grid: &Option<String>, b: Option<f64>, default_b: f64) -> Result<Vec<f64>, Error> {
    let grid: Vec<f64> = match b_grid {
        Some(text) => {
            let mut out = Vec::new();
            for part in text.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                out.push(
                    part.parse()
                        .map_err(|_| Error::Config(format!("bad base rate {part:?}")))?,
                );
            }
            out
        }
        None => vec![b.unwrap_or(default_b)],
    };
    if grid.is_empty() {
        return Err(Error::Config("empty base-rate grid".into()));
    }
    for &b in &grid {
        if !(0.01..=0.4).contains(&b) {
            return Err(Error::RateOutOfRange(b));
        }
    }
    Ok(grid)
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    let interactions = data::parse_interactions(&cfg.ratings_path)?;
    let entries = data::parse_catalog(&cfg.movies_path)?;
    let users = data::parse_users(&cfg.users_path)?;
    let catalog = data::ItemCatalog::from_entries(&entries);
    let (dataset, stats) = data::preprocess(
        interactions,
        catalog,
        users,
        cfg.min_rating,
        cfg.min_interactions,
    )?;
    snapshot::write_snapshot(&dataset, out, &cfg.data_hash())?;
    for w in &stats.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "prepared {} interactions, {} users, {} items -> {}",
        stats.interactions,
        stats.users,
        stats.items,
        out.display()
    );
    Ok(())
}

fn load_checked_snapshot(cfg: &RunConfig, dir: &Path) -> Result<data::SplitDataset, Error> {
    let (dataset, manifest) = snapshot::load_snapshot(dir)?;
    let expected = cfg.data_hash();
    if manifest.data_config_hash != expected {
        return Err(Error::ConfigHashMismatch {
            expected,
            found: manifest.data_config_hash,
        });
    }
    data::chronological_split(dataset, cfg.train_ratio)
}

fn run_audit(
    cfg: &RunConfig,
    snapshot_dir: &Path,
    out: &Path,
    format: &str,
    save_model: Option<&Path>,
) -> Result<(), Error> {
    let split = load_checked_snapshot(cfg, snapshot_dir)?;
    let model = models::train(&split, cfg.model, &cfg.hyper, cfg.seed)?;
    if let Some(path) = save_model {
        models::save_model(path, &model)?;
    }
    let report = audit::build_report(&split, &model, cfg, &cfg.data_hash())?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    export_report(&report, out, format)?;
    print_summary(&report);
    Ok(())
}

fn export_report(report: &AuditReport, out: &Path, format: &str) -> Result<(), Error> {
    match format {
        "tsv" => audit::export_tsv(report, out),
        "json" => audit::export_json(report, &out.join("report.json")),
        "both" => {
            audit::export_tsv(report, out)?;
            audit::export_json(report, &out.join("report.json"))
        }
        other => Err(Error::Config(format!(
            "unknown format {other:?} (expected tsv|json|both)"
        ))),
    }
}

fn print_summary(report: &AuditReport) {
    println!(
        "algorithm={} ndcg@{}={:.4} mc@{}={:.4} st={:.4} bias={:.4} variance={:.4} users={}",
        report.algorithm,
        report.k,
        report.ndcg_mean,
        report.k,
        report.system.miscalibration_mean,
        report.system.stereotype,
        report.system.bias_term,
        report.system.variance_term,
        report.audited_users
    );
}

fn run_mitigate(
    cfg: &RunConfig,
    snapshot_dir: &Path,
    out: &Path,
    grid: &[f64],
) -> Result<(), Error> {
    let split = load_checked_snapshot(cfg, snapshot_dir)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut rows = Vec::new();
    for &b in grid {
        let (comparison, _, after) = mitigate::run_mitigation_experiment(&split, cfg, b)?;
        println!(
            "model={} b={:.2} ndcg {:.4} -> {:.4} | st {:.4} -> {:.4} | mc {:.4} -> {:.4}",
            comparison.algorithm,
            b,
            comparison.before.ndcg,
            comparison.after.ndcg,
            comparison.before.stereotype,
            comparison.after.stereotype,
            comparison.before.miscalibration,
            comparison.after.miscalibration,
        );
        audit::export_json(&after, &out.join(format!("after_b{b}.json")))?;
        rows.push(comparison);
    }
    mitigate::export_comparisons_tsv(&rows, &out.join("mitigation.tsv"))?;
    mitigate::export_comparisons_json(&rows, &out.join("mitigation.json"))?;
    Ok(())
}

fn run_report(report_path: &Path, out: &Path, format: &str) -> Result<(), Error> {
    let report = audit::import_json(report_path)?;
    audit::verify_self_consistency(&report)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    export_report(&report, out, format)?;
    print_summary(&report);
    Ok(())
}
