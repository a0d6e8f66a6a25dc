use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use pdd_core::backends::BackendKind;
use pdd_core::benchmark::Setting;
use pdd_core::detectors::{
    generate_neighbors, lowercase_score, min_k_prob, neighbor_score, ppl_score, read_neighbor_file, smaller_ref_score,
    zlib_score, NeighborProvenance, DEFAULT_K_PERCENT,
};
use pdd_core::jsonl::parse_jsonl;
use pdd_core::{Backend, BackendConfig, DetectionScore, Detector, Error, Label, NeighborSet, Result, TokenLogProbs};
use serde::{Deserialize, Serialize};

use crate::config::{resolve_role, BackendArgs, FileConfig, Format};
use crate::run::{csv_field, Run};

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Examples to score: JSON lines with `id` and `text`, optionally `label`, `setting`, `length_bucket`, `doc_id`.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Detectors to run, comma separated: min_k_prob, ppl, zlib, lowercase, smaller_ref, neighbor.
    #[arg(long, value_delimiter = ',', default_value = "min_k_prob")]
    pub detector: Vec<Detector>,
    /// Percentage of lowest-probability tokens averaged by min_k_prob (default 20).
    #[arg(long)]
    pub k: Option<f64>,
    /// Reference model for smaller_ref: bigram:PATH, file:PATH or http:URL.
    #[arg(long, value_name = "KIND:VALUE")]
    pub reference: Option<String>,
    #[arg(long)]
    pub reference_model: Option<String>,
    /// Neighbor texts per example (JSON lines {"id", "neighbors"}); generated when absent.
    #[arg(long, value_name = "PATH")]
    pub neighbors: Option<PathBuf>,
    /// Number of generated single-edit neighbors per example.
    #[arg(long, default_value_t = 5)]
    pub n_neighbors: usize,
}

#[derive(Debug, Deserialize)]
struct InputRecord {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<Label>,
    #[serde(default)]
    setting: Option<Setting>,
    #[serde(default)]
    length_bucket: Option<usize>,
    #[serde(default)]
    doc_id: Option<String>,
}

impl InputRecord {
    fn setting_key(&self) -> Option<String> {
        if self.setting.is_none() && self.length_bucket.is_none() {
            return None;
        }
        let setting = match self.setting.unwrap_or_default() {
            Setting::Original => "original",
            Setting::Paraphrase => "paraphrase",
        };
        Some(match self.length_bucket {
            Some(l) => format!("{setting}-{l}"),
            None => setting.to_string(),
        })
    }
}

/// One line of `scores.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub detector: Detector,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct Failure {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    detector: Option<Detector>,
    error: &'static str,
    message: String,
}

/// Reads a scores file written by `score` (JSON lines or the CSV layout).
pub fn read_scores(run: &mut Run, path: &Path) -> Result<Vec<ScoreRow>> {
    let text = run.read_string(path)?;
    let rows: Vec<ScoreRow> = if path.extension().is_some_and(|e| e == "csv") {
        parse_scores_csv(&text, path)?
    } else {
        parse_jsonl(&text, path)?
    };
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(rows)
}

fn parse_scores_csv(text: &str, path: &Path) -> Result<Vec<ScoreRow>> {
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SCORES_CSV_HEADER => {}
        _ => return Err(bad(1, format!("expected header {SCORES_CSV_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let f = split_csv_line(line);
        if f.len() != 6 {
            return Err(bad(i + 1, format!("expected 6 fields, got {}", f.len())));
        }
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        rows.push(ScoreRow {
            id: f[0].clone(),
            label: opt(&f[1])
                .map(|l| l.parse())
                .transpose()
                .map_err(|e: Error| bad(i + 1, e.to_string()))?,
            setting: opt(&f[2]),
            doc_id: opt(&f[3]),
            detector: f[4].parse().map_err(|e: Error| bad(i + 1, e.to_string()))?,
            value: f[5].parse().map_err(|e| bad(i + 1, format!("{e}")))?,
            params: BTreeMap::new(),
        });
    }
    Ok(rows)
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = vec![String::new()];
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                chars.next();
                fields.last_mut().unwrap().push('"');
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(String::new()),
            (c, _) => fields.last_mut().unwrap().push(c),
        }
    }
    fields
}

const SCORES_CSV_HEADER: &str = "id,label,setting,doc_id,detector,value";

fn scores_csv(rows: &[ScoreRow]) -> String {
    let mut out = format!("{SCORES_CSV_HEADER}\n");
    for r in rows {
        let label = r.label.map(|l| if l.is_member() { "member" } else { "nonmember" });
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&r.id),
            label.unwrap_or(""),
            csv_field(r.setting.as_deref().unwrap_or("")),
            csv_field(r.doc_id.as_deref().unwrap_or("")),
            r.detector,
            r.value
        );
    }
    out
}

fn load_backend(run: &mut Run, cfg: &BackendConfig) -> Result<Backend> {
    if let (BackendKind::File | BackendKind::Bigram, Some(p)) = (cfg.kind, &cfg.path) {
        run.hash_input(p)?;
    }
    Backend::from_config(cfg)
}

/// Resolves the primary backend and records it in the manifest.
pub fn primary_backend(args: &BackendArgs, file: &FileConfig, run: &mut Run) -> Result<Backend> {
    let cfg = args.resolve(file.backend.as_ref(), |k| std::env::var(k).ok())?;
    run.set("backend", &cfg);
    load_backend(run, &cfg)
}

/// Resolves a secondary backend (`reference`, `unlearned`, `original`).
pub fn role_backend(
    role: &str,
    spec: Option<&str>,
    model: Option<&str>,
    from_file: Option<&BackendConfig>,
    run: &mut Run,
) -> Result<Backend> {
    let cfg = resolve_role(role, spec, model, from_file)?;
    run.set(role, &cfg);
    load_backend(run, &cfg)
}

pub fn run(args: &ScoreArgs, file: &FileConfig, run: &mut Run) -> Result<()> {
    let k = args.k.or(file.k).unwrap_or(DEFAULT_K_PERCENT);
    if !(k > 0.0 && k <= 100.0) {
        return Err(Error::InvalidK(k));
    }
    let mut detectors = args.detector.clone();
    detectors.sort_by_key(|d| Detector::ALL.iter().position(|x| x == d));
    detectors.dedup();
    if detectors.is_empty() {
        return Err(Error::ConfigInvalid("no detector selected".into()));
    }
    run.set("input", &args.input);
    run.set("detectors", &detectors);
    run.set("k", k);

    let text = run.read_string(&args.input)?;
    let records: Vec<InputRecord> = parse_jsonl(&text, &args.input)?;
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let backend = primary_backend(&args.backend, file, run)?;
    let texts: Vec<String> = records.iter().map(|r| r.text.clone()).collect();
    let primary = backend.score_batch(&texts);

    let lowered = if detectors.contains(&Detector::Lowercase) {
        let lower: Vec<String> = texts.iter().map(|t| t.to_lowercase()).collect();
        Some(backend.score_batch(&lower))
    } else {
        None
    };
    let reference = if detectors.contains(&Detector::SmallerRef) {
        let b = role_backend(
            "reference",
            args.reference.as_deref(),
            args.reference_model.as_deref(),
            file.reference.as_ref(),
            run,
        )?;
        Some(b.score_batch(&texts))
    } else {
        None
    };
    let neighbors = if detectors.contains(&Detector::Neighbor) {
        Some(score_neighbors(args, &records, &backend, run)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut first_error: Option<Error> = None;
    let mut fail = |id: &str, detector: Option<Detector>, e: Error| {
        failures.push(Failure {
            id: id.to_string(),
            detector,
            error: e.kind(),
            message: e.to_string(),
        });
        first_error.get_or_insert(e);
    };
    let mut lowered = lowered.map(Vec::into_iter);
    let mut reference = reference.map(Vec::into_iter);
    let mut neighbors = neighbors.map(Vec::into_iter);
    for (rec, scored) in records.iter().zip(primary) {
        // keep the side iterators in step with the records
        let mut low = lowered.as_mut().and_then(Iterator::next);
        let mut refd = reference.as_mut().and_then(Iterator::next);
        let mut nbrs = neighbors.as_mut().and_then(Iterator::next);
        let scored = match scored {
            Ok(s) => s,
            Err(e) => {
                fail(&rec.id, None, e);
                continue;
            }
        };
        for &d in &detectors {
            let value = match d {
                Detector::MinKProb => min_k_prob(&scored, k),
                Detector::Ppl => ppl_score(&scored),
                Detector::Zlib => zlib_score(&scored),
                Detector::Lowercase => low
                    .take()
                    .expect("lowercase batch")
                    .and_then(|l| lowercase_score(&scored, &l)),
                Detector::SmallerRef => refd
                    .take()
                    .expect("reference batch")
                    .and_then(|r| smaller_ref_score(&scored, &r)),
                Detector::Neighbor => nbrs
                    .take()
                    .expect("neighbor batch")
                    .and_then(|n| neighbor_score(&scored, &n)),
            };
            match value {
                Ok(score) => rows.push(row(rec, score)),
                Err(e) => fail(&rec.id, Some(d), e),
            }
        }
    }

    match run.format {
        Format::Json => run.write_jsonl("scores.jsonl", &rows)?,
        Format::Csv => run.write("scores.csv", scores_csv(&rows).as_bytes())?,
    };
    if !failures.is_empty() {
        log::warn!("{} scoring failure(s), see failures.jsonl", failures.len());
        run.write_jsonl("failures.jsonl", &failures)?;
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn row(rec: &InputRecord, score: DetectionScore) -> ScoreRow {
    ScoreRow {
        id: rec.id.clone(),
        detector: score.detector,
        value: score.value,
        label: rec.label,
        setting: rec.setting_key(),
        doc_id: rec.doc_id.clone(),
        params: score.params,
    }
}

/// Neighbor scorings per record, or the reason the record has none.
fn score_neighbors(
    args: &ScoreArgs,
    records: &[InputRecord],
    backend: &Backend,
    run: &mut Run,
) -> Result<Vec<Result<Vec<TokenLogProbs>>>> {
    let from_file = match &args.neighbors {
        Some(p) => {
            run.set("neighbors", p);
            run.hash_input(p)?;
            Some(read_neighbor_file(p)?)
        }
        None => {
            run.set("n_neighbors", args.n_neighbors);
            None
        }
    };
    let sets: Vec<Result<NeighborSet>> = records
        .iter()
        .map(|r| match &from_file {
            Some(map) => match map.get(&r.id) {
                Some(n) => NeighborSet::new(&r.id, &r.text, n.clone(), NeighborProvenance::File, None),
                None => Err(Error::MissingRecord(format!("no neighbors for {:?}", r.id))),
            },
            None => generate_neighbors(&r.id, &r.text, args.n_neighbors, run.seed),
        })
        .collect();
    let flat: Vec<String> = sets
        .iter()
        .flat_map(|s| s.as_ref().map(|s| s.neighbors.clone()).unwrap_or_default())
        .collect();
    let mut scored = backend.score_batch(&flat).into_iter();
    Ok(sets
        .into_iter()
        .map(|set| {
            let set = set?;
            let mut out = Vec::with_capacity(set.neighbors.len());
            let mut first_err = None;
            for r in scored.by_ref().take(set.neighbors.len()) {
                match r {
                    Ok(s) => out.push(s),
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            match first_err {
                Some(e) => Err(e),
                None => Ok(out),
            }
        })
        .collect())
}
