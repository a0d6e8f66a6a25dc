mod audit;
mod config;
mod data;
mod eval;
mod lab;
mod run;
mod score;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdd_core::Result;

use config::{FileConfig, Format};
use run::Run;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  invalid configuration or arguments
  3  backend or page source unavailable, or malformed backend response
  4  invalid or insufficient input data

Errors are reported on standard error as one JSON object.
Settings resolve as: config file < flags < PDD_ENDPOINT / PDD_MODEL.";

#[derive(Debug, Parser)]
#[command(name = "pdd", version, about = "Reference-free pretraining-data detection", after_help = EXIT_CODES)]
struct Cli {
    /// TOML file with defaults for any of the settings below.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random choice in the run (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Format of the main report.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Directory receiving the artifacts and manifest.json (default: pdd-out).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score examples with one or more detectors.
    Score(score::ScoreArgs),
    /// AUC, ROC and TPR at fixed FPR from a scores file.
    Eval(eval::EvalArgs),
    /// Pick the accuracy-maximizing threshold; optionally apply it to snippet scores.
    Calibrate(eval::CalibrateArgs),
    /// Build a dated Wikipedia membership benchmark.
    BuildWikimia(data::WikiArgs),
    /// Truncate examples to fixed word lengths, optionally adding paraphrases.
    Bucket(data::BucketArgs),
    /// Cut fixed-length snippets from long documents.
    Snippets(data::SnippetArgs),
    /// Contamination experiments with the built-in bigram model.
    ContamLab(lab::LabArgs),
    /// Compare an unlearned model with its original.
    AuditUnlearn(audit::AuditArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Score(_) => "score",
            Command::Eval(_) => "eval",
            Command::Calibrate(_) => "calibrate",
            Command::BuildWikimia(_) => "build-wikimia",
            Command::Bucket(_) => "bucket",
            Command::Snippets(_) => "snippets",
            Command::ContamLab(_) => "contam-lab",
            Command::AuditUnlearn(_) => "audit-unlearn",
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let format = cli.format.or(file.format).unwrap_or_default();
    let quiet = cli.quiet || file.quiet.unwrap_or(false);
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("pdd-out"));
    let mut run = Run::new(cli.command.name(), seed, format, quiet, out_dir)?;
    if let Some(p) = &cli.config {
        run.hash_input(p)?;
    }
    let outcome = match &cli.command {
        Command::Score(a) => score::run(a, &file, &mut run),
        Command::Eval(a) => eval::run_eval(a, &file, &mut run),
        Command::Calibrate(a) => eval::run_calibrate(a, &mut run),
        Command::BuildWikimia(a) => data::run_wikimia(a, &mut run),
        Command::Bucket(a) => data::run_bucket(a, &file, &mut run),
        Command::Snippets(a) => data::run_snippets(a, &mut run),
        Command::ContamLab(a) => lab::run(a, &file, &mut run),
        Command::AuditUnlearn(a) => audit::run(a, &file, &mut run),
    };
    match outcome {
        Ok(()) => run.finish(),
        Err(e) => {
            // partial results still get a manifest
            if run.has_outputs() {
                run.finish()?;
            }
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let line = serde_json::json!({
                "error": "Usage",
                "message": e.to_string().trim_end(),
                "exit_code": run::EXIT_CONFIG,
            });
            eprintln!("{line}");
            return ExitCode::from(run::EXIT_CONFIG as u8);
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::from(run::EXIT_OK as u8),
        Err(e) => {
            eprintln!("{}", run::error_json(&e));
            ExitCode::from(run::exit_code(&e) as u8)
        }
    }
}
