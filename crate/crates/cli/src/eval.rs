use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use pdd_core::evaluation::{
    auc, calibrate_threshold, contamination_rate, evaluate, roc_csv, summary_csv, ContaminationReport, SummaryCell,
    DEFAULT_FPR_CAPS,
};
use pdd_core::{Detector, Error, EvalReport, Result, ScoredExample, Threshold};
use serde::Serialize;

use crate::config::{FileConfig, Format};
use crate::run::{csv_field, Run};
use crate::score::{read_scores, ScoreRow};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labeled scores written by `pdd score`.
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// FPR caps for the TPR table (default 0.01,0.05,0.1).
    #[arg(long, value_delimiter = ',')]
    pub fpr_caps: Option<Vec<f64>>,
    /// Only evaluate these detectors.
    #[arg(long, value_delimiter = ',')]
    pub detector: Vec<Detector>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Labeled validation scores.
    #[arg(long, value_name = "PATH")]
    pub validation: PathBuf,
    /// Detector to calibrate; required when the file holds several.
    #[arg(long)]
    pub detector: Option<Detector>,
    /// Snippet scores (with `doc_id`) to classify with the calibrated threshold.
    #[arg(long, value_name = "PATH")]
    pub apply: Option<PathBuf>,
}

fn labeled(rows: &[&ScoreRow]) -> Result<Vec<ScoredExample>> {
    rows.iter()
        .map(|r| match r.label {
            Some(label) => Ok(ScoredExample::new(r.id.clone(), r.value, label)),
            None => Err(Error::InvalidExample {
                id: r.id.clone(),
                reason: "missing label".into(),
            }),
        })
        .collect()
}

fn by_detector(rows: &[ScoreRow]) -> BTreeMap<Detector, Vec<&ScoreRow>> {
    let mut out: BTreeMap<Detector, Vec<&ScoreRow>> = BTreeMap::new();
    for r in rows {
        out.entry(r.detector).or_default().push(r);
    }
    out
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    seed: u64,
    fpr_caps: &'a [f64],
    reports: &'a [EvalReport],
    /// Per-setting AUCs; the mean over settings in summary.csv is unweighted.
    by_setting: &'a [SummaryCell],
}

fn eval_csv(reports: &[EvalReport], caps: &[f64]) -> String {
    let mut out = String::from("detector,n_members,n_nonmembers,auc");
    for c in caps {
        let _ = write!(out, ",tpr@fpr={c}");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{},{},{},{:.6}", r.detector, r.n_members, r.n_nonmembers, r.auc);
        for t in &r.tpr_at_fpr {
            let _ = write!(out, ",{:.6}", t.tpr);
        }
        out.push('\n');
    }
    out
}

pub fn run_eval(args: &EvalArgs, file: &FileConfig, run: &mut Run) -> Result<()> {
    let caps = args
        .fpr_caps
        .clone()
        .or_else(|| file.fpr_caps.clone())
        .unwrap_or_else(|| DEFAULT_FPR_CAPS.to_vec());
    run.set("scores", &args.scores);
    run.set("fpr_caps", &caps);
    run.set("detectors", &args.detector);
    let rows = read_scores(run, &args.scores)?;

    let mut reports = Vec::new();
    let mut cells = Vec::new();
    for (detector, rows) in by_detector(&rows) {
        if !args.detector.is_empty() && !args.detector.contains(&detector) {
            continue;
        }
        let examples = labeled(&rows)?;
        reports.push(evaluate(detector.name(), &examples, &caps)?);

        let mut settings: BTreeMap<&str, Vec<ScoredExample>> = BTreeMap::new();
        for (r, e) in rows.iter().zip(examples) {
            settings
                .entry(r.setting.as_deref().unwrap_or("all"))
                .or_default()
                .push(e);
        }
        for (setting, examples) in settings {
            match auc(&examples) {
                Ok(a) => cells.push(SummaryCell {
                    detector: detector.name().to_string(),
                    setting: setting.to_string(),
                    auc: a,
                }),
                Err(e) => log::warn!("skipping {detector}/{setting}: {e}"),
            }
        }
    }
    if reports.is_empty() {
        return Err(Error::ConfigInvalid("no scores for the selected detectors".into()));
    }

    match run.format {
        Format::Json => run.write_json(
            "eval.json",
            &EvalOutput {
                seed: run.seed,
                fpr_caps: &caps,
                reports: &reports,
                by_setting: &cells,
            },
        )?,
        Format::Csv => run.write("eval.csv", eval_csv(&reports, &caps).as_bytes())?,
    };
    for r in &reports {
        run.write(&format!("roc-{}.csv", r.detector), roc_csv(&r.roc).as_bytes())?;
    }
    run.write("summary.csv", summary_csv(&cells).as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct CalibrationOutput<'a> {
    seed: u64,
    detector: Detector,
    n_validation: usize,
    threshold: &'a Threshold,
}

#[derive(Serialize)]
struct ApplyOutput<'a> {
    seed: u64,
    detector: Detector,
    #[serde(flatten)]
    report: &'a ContaminationReport,
}

fn pick_detector(rows: &[ScoreRow], wanted: Option<Detector>) -> Result<Detector> {
    let present: Vec<Detector> = by_detector(rows).into_keys().collect();
    match wanted {
        Some(d) if present.contains(&d) => Ok(d),
        Some(d) => Err(Error::ConfigInvalid(format!("no {d} scores in the validation file"))),
        None if present.len() == 1 => Ok(present[0]),
        None => Err(Error::ConfigInvalid(format!(
            "validation file holds {} detectors; choose one with --detector",
            present.len()
        ))),
    }
}

pub fn run_calibrate(args: &CalibrateArgs, run: &mut Run) -> Result<()> {
    run.set("validation", &args.validation);
    run.set("apply", &args.apply);
    let rows = read_scores(run, &args.validation)?;
    let detector = pick_detector(&rows, args.detector)?;
    run.set("detector", detector);
    let selected: Vec<&ScoreRow> = rows.iter().filter(|r| r.detector == detector).collect();
    let threshold = calibrate_threshold(&labeled(&selected)?)?;

    match run.format {
        Format::Json => run.write_json(
            "threshold.json",
            &CalibrationOutput {
                seed: run.seed,
                detector,
                n_validation: selected.len(),
                threshold: &threshold,
            },
        )?,
        Format::Csv => {
            let csv = format!(
                "detector,epsilon,rule,achieved_accuracy,fpr,tpr\n{detector},{},{},{},{},{}\n",
                threshold.epsilon,
                csv_field(&threshold.rule),
                threshold.achieved_accuracy,
                threshold.fpr,
                threshold.tpr
            );
            run.write("threshold.csv", csv.as_bytes())?
        }
    };

    let Some(apply) = &args.apply else {
        return Ok(());
    };
    let snippets = read_scores(run, apply)?;
    let mut by_doc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in snippets.iter().filter(|r| r.detector == detector) {
        let doc = r.doc_id.clone().ok_or_else(|| Error::InvalidExample {
            id: r.id.clone(),
            reason: "snippet score without doc_id".into(),
        })?;
        by_doc.entry(doc).or_default().push(r.value);
    }
    if by_doc.is_empty() {
        return Err(Error::EmptyInput);
    }
    let report = contamination_rate(&by_doc, &threshold)?;
    match run.format {
        Format::Json => run.write_json(
            "contamination.json",
            &ApplyOutput {
                seed: run.seed,
                detector,
                report: &report,
            },
        )?,
        Format::Csv => {
            let mut rates = String::from("doc_id,n_snippets,rate\n");
            for (doc, rate) in &report.rates {
                let _ = writeln!(rates, "{},{},{rate}", csv_field(doc), by_doc[doc].len());
            }
            run.write("contamination.csv", rates.as_bytes())?;
            let mut hist = String::from("lower,upper,count\n");
            for b in &report.histogram {
                let _ = writeln!(hist, "{},{},{}", b.lower, b.upper, b.count);
            }
            run.write("contamination_histogram.csv", hist.as_bytes())?
        }
    };
    Ok(())
}
