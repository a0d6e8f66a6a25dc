use std::path::PathBuf;

use clap::Args;
use pdd_core::detectors::{min_k_prob, DEFAULT_K_PERCENT};
use pdd_core::jsonl::parse_jsonl;
use pdd_core::unlearning::{
    audit_chunk, audit_questions, chunk_pairs_csv, chunk_text, qa_report_csv, QaInput, DEFAULT_BAND,
    DEFAULT_CHUNK_WORDS,
};
use pdd_core::{Backend, ChunkPair, Error, Result, TokenLogProbs};
use serde::Serialize;

use crate::config::{FileConfig, Format};
use crate::run::Run;
use crate::score::role_backend;

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Book text to split into chunks.
    #[arg(long, value_name = "PATH", conflicts_with = "qa", required_unless_present = "qa")]
    pub book: Option<PathBuf>,
    /// Question-answer audit input (JSON lines {"question", "reference_answer", "candidates"}).
    #[arg(long, value_name = "PATH")]
    pub qa: Option<PathBuf>,
    /// Unlearned model: bigram:PATH, file:PATH or http:URL.
    #[arg(long, value_name = "KIND:VALUE")]
    pub unlearned: Option<String>,
    #[arg(long)]
    pub unlearned_model: Option<String>,
    /// Original model: bigram:PATH, file:PATH or http:URL.
    #[arg(long, value_name = "KIND:VALUE")]
    pub original: Option<String>,
    #[arg(long)]
    pub original_model: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CHUNK_WORDS)]
    pub chunk_words: usize,
    #[arg(long)]
    pub k: Option<f64>,
    /// A chunk or question is selected when 1/band < ratio < band.
    #[arg(long)]
    pub band: Option<f64>,
}

#[derive(Serialize)]
struct ChunkReport<'a> {
    seed: u64,
    k: f64,
    band: f64,
    n_chunks: usize,
    n_suspicious: usize,
    chunks: &'a [ChunkPair],
}

#[derive(Serialize)]
struct QaReport<'a> {
    seed: u64,
    k: f64,
    #[serde(flatten)]
    report: &'a pdd_core::unlearning::QaAuditReport,
}

fn all_ok(results: Vec<Result<TokenLogProbs>>) -> Result<Vec<TokenLogProbs>> {
    results.into_iter().collect()
}

pub fn run(args: &AuditArgs, file: &FileConfig, run: &mut Run) -> Result<()> {
    let k = args.k.or(file.k).unwrap_or(DEFAULT_K_PERCENT);
    let band = args.band.or(file.band).unwrap_or(DEFAULT_BAND);
    if band.is_nan() || band <= 1.0 {
        return Err(Error::InvalidBand(band));
    }
    run.set("k", k);
    run.set("band", band);
    let unlearned = role_backend(
        "unlearned",
        args.unlearned.as_deref(),
        args.unlearned_model.as_deref(),
        file.unlearned.as_ref(),
        run,
    )?;
    let original = role_backend(
        "original",
        args.original.as_deref(),
        args.original_model.as_deref(),
        file.original.as_ref(),
        run,
    )?;
    match (&args.book, &args.qa) {
        (Some(book), _) => audit_book(book, args.chunk_words, k, band, &unlearned, &original, run),
        (None, Some(qa)) => audit_qa(qa, k, band, &unlearned, &original, run),
        (None, None) => Err(Error::ConfigInvalid("pass --book or --qa".into())),
    }
}

fn audit_book(
    path: &PathBuf,
    chunk_words: usize,
    k: f64,
    band: f64,
    unlearned: &Backend,
    original: &Backend,
    run: &mut Run,
) -> Result<()> {
    run.set("book", path);
    run.set("chunk_words", chunk_words);
    let text = run.read_string(path)?;
    let chunks = chunk_text(&text, chunk_words)?;
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let su = all_ok(unlearned.score_batch(&texts))?;
    let so = all_ok(original.score_batch(&texts))?;
    let pairs = chunks
        .iter()
        .zip(su.iter().zip(&so))
        .map(|(c, (u, o))| audit_chunk(c, u, o, k, band))
        .collect::<Result<Vec<_>>>()?;
    match run.format {
        Format::Json => run.write_json(
            "chunks.json",
            &ChunkReport {
                seed: run.seed,
                k,
                band,
                n_chunks: pairs.len(),
                n_suspicious: pairs.iter().filter(|p| p.suspicious).count(),
                chunks: &pairs,
            },
        )?,
        Format::Csv => run.write("chunks.csv", chunk_pairs_csv(&pairs).as_bytes())?,
    };
    Ok(())
}

/// Questions are scored on their own text under both models.
fn audit_qa(path: &PathBuf, k: f64, band: f64, unlearned: &Backend, original: &Backend, run: &mut Run) -> Result<()> {
    run.set("qa", path);
    let text = run.read_string(path)?;
    let inputs: Vec<QaInput> = parse_jsonl(&text, path)?;
    if inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let questions: Vec<String> = inputs.iter().map(|q| q.question.clone()).collect();
    let su = all_ok(unlearned.score_batch(&questions))?;
    let so = all_ok(original.score_batch(&questions))?;
    let scores = su
        .iter()
        .zip(&so)
        .map(|(u, o)| Ok((min_k_prob(u, k)?.value, min_k_prob(o, k)?.value)))
        .collect::<Result<Vec<_>>>()?;
    let report = audit_questions(&inputs, &scores, band)?;
    match run.format {
        Format::Json => run.write_json(
            "qa_report.json",
            &QaReport {
                seed: run.seed,
                k,
                report: &report,
            },
        )?,
        Format::Csv => run.write("qa_report.csv", qa_report_csv(&report).as_bytes())?,
    };
    Ok(())
}
