use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use pdd_core::backends::bigram::DEFAULT_ALPHA;
use pdd_core::contamination::{
    occurrence_bins_csv, occurrence_sweep, run_contamination_experiment, size_sweep, sweep_csv, ContaminantSource,
    LabConfig, SweepPoint,
};
use pdd_core::detectors::DEFAULT_K_PERCENT;
use pdd_core::jsonl::parse_jsonl;
use pdd_core::{ContamResult, ContamSpec, Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{FileConfig, Format};
use crate::run::Run;

#[derive(Debug, Args)]
pub struct LabArgs {
    /// Poisson occurrence rates, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,4,16")]
    pub lambda: Vec<f64>,
    /// Number of seeds per cell: --seed, --seed + 1, ...
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Base corpus size in words.
    #[arg(long, default_value_t = 100_000)]
    pub base_words: usize,
    /// Number of contaminants (synthetic mode).
    #[arg(long, default_value_t = 100)]
    pub contaminants: usize,
    /// Number of held-out non-members (synthetic mode).
    #[arg(long, default_value_t = 100)]
    pub holdout: usize,
    /// in-distribution | outlier
    #[arg(long, default_value = "in-distribution")]
    pub source: ContaminantSource,
    /// Base-size multipliers for the size sweep, e.g. 1,10.
    #[arg(long, value_delimiter = ',')]
    pub size_scales: Vec<usize>,
    /// Occurrence rate used by the size sweep.
    #[arg(long, default_value_t = 4.0)]
    pub size_lambda: f64,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// User base corpus, one document per line (replaces the synthetic language).
    #[arg(long, value_name = "PATH", requires_all = ["contaminant_file", "holdout_file"])]
    pub base_corpus: Option<PathBuf>,
    /// User contaminants, JSON lines {"id", "text"}.
    #[arg(long, value_name = "PATH", requires = "base_corpus")]
    pub contaminant_file: Option<PathBuf>,
    /// User held-out non-members, JSON lines {"id", "text"}.
    #[arg(long, value_name = "PATH", requires = "base_corpus")]
    pub holdout_file: Option<PathBuf>,
}

#[derive(Deserialize)]
struct Doc {
    id: String,
    text: String,
}

#[derive(Serialize)]
struct SyntheticReport<'a> {
    seed: u64,
    model: &'static str,
    config: &'a LabConfig,
    occurrence_sweep: &'a [SweepPoint],
    size_sweep: &'a [SweepPoint],
}

#[derive(Serialize)]
struct TrialRecord<'a> {
    lambda: f64,
    seed: u64,
    #[serde(flatten)]
    result: &'a ContamResult,
}

#[derive(Serialize)]
struct CorpusReport<'a> {
    seed: u64,
    model: &'static str,
    occurrence_sweep: &'a [SweepPoint],
    trials: Vec<TrialRecord<'a>>,
}

const MODEL_NOTE: &str = "add-alpha word bigram trained on the contaminated corpus";

pub fn run(args: &LabArgs, file: &FileConfig, run: &mut Run) -> Result<()> {
    if args.lambda.is_empty() || args.seeds == 0 {
        return Err(Error::ConfigInvalid("need at least one lambda and one seed".into()));
    }
    let k = args.k.or(file.k).unwrap_or(DEFAULT_K_PERCENT);
    let seeds: Vec<u64> = (0..args.seeds).map(|i| run.seed.wrapping_add(i)).collect();
    run.set("lambda", &args.lambda);
    run.set("seeds", &seeds);
    run.set("base_words", args.base_words);
    run.set("k", k);
    run.set("alpha", args.alpha);
    match &args.base_corpus {
        Some(_) => user_corpus(args, k, &seeds, run),
        None => synthetic(args, k, &seeds, run),
    }
}

fn synthetic(args: &LabArgs, k: f64, seeds: &[u64], run: &mut Run) -> Result<()> {
    let config = LabConfig {
        base_words: args.base_words,
        n_contaminants: args.contaminants,
        n_holdout: args.holdout,
        source: args.source,
        k_percent: k,
        alpha: args.alpha,
        ..LabConfig::default()
    };
    run.set("lab", &config);
    run.set("size_scales", &args.size_scales);
    run.set("size_lambda", args.size_lambda);
    let occurrence = occurrence_sweep(&config, &args.lambda, seeds)?;
    let size = if args.size_scales.is_empty() {
        Vec::new()
    } else {
        size_sweep(&config, args.size_lambda, &args.size_scales, seeds)?
    };
    run.write("occurrence_sweep.csv", sweep_csv(&occurrence).as_bytes())?;
    if !size.is_empty() {
        run.write("size_sweep.csv", sweep_csv(&size).as_bytes())?;
    }
    if run.format == Format::Json {
        run.write_json(
            "lab.json",
            &SyntheticReport {
                seed: run.seed,
                model: MODEL_NOTE,
                config: &config,
                occurrence_sweep: &occurrence,
                size_sweep: &size,
            },
        )?;
    }
    Ok(())
}

fn user_corpus(args: &LabArgs, k: f64, seeds: &[u64], run: &mut Run) -> Result<()> {
    let (Some(base), Some(cont), Some(hold)) = (&args.base_corpus, &args.contaminant_file, &args.holdout_file) else {
        return Err(Error::ConfigInvalid(
            "--base-corpus needs --contaminant-file and --holdout-file".into(),
        ));
    };
    run.set("base_corpus", base);
    run.set("contaminant_file", cont);
    run.set("holdout_file", hold);
    let base_corpus: Vec<String> = run
        .read_string(base)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect();
    let mut docs = |p: &PathBuf| -> Result<Vec<(String, String)>> {
        let text = run.read_string(p)?;
        Ok(parse_jsonl::<Doc>(&text, p)?
            .into_iter()
            .map(|d| (d.id, d.text))
            .collect())
    };
    let contaminants = docs(cont)?;
    let holdout = docs(hold)?;

    let mut results = Vec::new();
    for &lambda in &args.lambda {
        for &seed in seeds {
            let spec = ContamSpec {
                base_corpus: base_corpus.clone(),
                contaminants: contaminants.clone(),
                occurrence_lambda: lambda,
                base_token_target: args.base_words,
                seed,
                alpha: args.alpha,
            };
            results.push((lambda, seed, run_contamination_experiment(&spec, &holdout, k)?));
        }
    }
    let points: Vec<SweepPoint> = args
        .lambda
        .iter()
        .map(|&lambda| {
            let aucs = results
                .iter()
                .filter(|(l, _, _)| *l == lambda)
                .map(|(_, _, r)| r.overall_auc)
                .collect();
            SweepPoint::new(lambda, args.base_words, seeds, aucs)
        })
        .collect();
    run.write("occurrence_sweep.csv", sweep_csv(&points).as_bytes())?;
    let mut bins = String::new();
    for (lambda, seed, r) in &results {
        for (i, line) in occurrence_bins_csv(r).lines().enumerate() {
            match (i, bins.is_empty()) {
                (0, true) => {
                    let _ = writeln!(bins, "lambda,seed,{line}");
                }
                (0, false) => {}
                _ => {
                    let _ = writeln!(bins, "{lambda},{seed},{line}");
                }
            }
        }
    }
    run.write("occurrence_bins.csv", bins.as_bytes())?;
    if run.format == Format::Json {
        run.write_json(
            "lab.json",
            &CorpusReport {
                seed: run.seed,
                model: MODEL_NOTE,
                occurrence_sweep: &points,
                trials: results
                    .iter()
                    .map(|(lambda, seed, result)| TrialRecord {
                        lambda: *lambda,
                        seed: *seed,
                        result,
                    })
                    .collect(),
            },
        )?;
    }
    Ok(())
}
