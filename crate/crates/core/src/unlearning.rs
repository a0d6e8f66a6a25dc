//! Auditing an "unlearned" model against the model it was derived from.
//!
//! A chunk (or question) is suspicious when both models assign it nearly the
//! same Min-K% Prob: the ratio of their negative scores falls inside
//! `(1/band, band)`. Leakage is then measured by word-level ROUGE-L recall of
//! sampled answers against reference answers.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::backends::TokenLogProbs;
use crate::detectors::{min_k_prob, DetectionScore, Detector};
use crate::error::{Error, Result};

pub const DEFAULT_BAND: f64 = 1.15;
pub const DEFAULT_CHUNK_WORDS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub start_word: usize,
    pub text: String,
}

/// Consecutive non-overlapping windows of `words_per_chunk` words.
///
/// A trailing partial window is kept when it holds at least half a window.
pub fn chunk_text(book_text: &str, words_per_chunk: usize) -> Result<Vec<Chunk>> {
    if words_per_chunk == 0 {
        return Err(Error::ConfigInvalid("chunk size must be positive".into()));
    }
    let words: Vec<&str> = book_text.split_whitespace().collect();
    if words.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(words
        .chunks(words_per_chunk)
        .enumerate()
        .filter(|(_, c)| c.len() == words_per_chunk || 2 * c.len() >= words_per_chunk)
        .map(|(i, c)| Chunk {
            chunk_id: format!("chunk-{i:05}"),
            start_word: i * words_per_chunk,
            text: c.join(" "),
        })
        .collect())
}

/// Ratio of the two models' negative Min-K% scores and whether it falls inside the band.
pub fn ratio_filter(
    score_unlearned: &DetectionScore,
    score_original: &DetectionScore,
    band: f64,
) -> Result<(f64, bool)> {
    for s in [score_unlearned, score_original] {
        if s.detector != Detector::MinKProb {
            return Err(Error::ConfigInvalid(format!(
                "ratio filter expects min_k_prob scores, got {}",
                s.detector
            )));
        }
    }
    ratio_from_values(score_unlearned.value, score_original.value, band)
}

/// [`ratio_filter`] on raw Min-K% values.
pub fn ratio_from_values(unlearned: f64, original: f64, band: f64) -> Result<(f64, bool)> {
    if band.is_nan() || band <= 1.0 {
        return Err(Error::InvalidBand(band));
    }
    let nll_u = -unlearned;
    let nll_o = -original;
    for nll in [nll_u, nll_o] {
        if !(nll > 0.0 && nll.is_finite()) {
            return Err(Error::DegenerateScore(nll));
        }
    }
    let ratio = nll_u / nll_o;
    Ok((ratio, 1.0 / band < ratio && ratio < band))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPair {
    pub chunk_id: String,
    pub text: String,
    pub score_unlearned: f64,
    pub score_original: f64,
    pub ratio: f64,
    pub suspicious: bool,
}

/// Scores one chunk under both models and applies the ratio filter.
pub fn audit_chunk(
    chunk: &Chunk,
    unlearned: &TokenLogProbs,
    original: &TokenLogProbs,
    k_percent: f64,
    band: f64,
) -> Result<ChunkPair> {
    if unlearned.text != chunk.text || original.text != chunk.text {
        return Err(Error::TextMismatch);
    }
    let su = min_k_prob(unlearned, k_percent)?;
    let so = min_k_prob(original, k_percent)?;
    let (ratio, suspicious) = ratio_filter(&su, &so, band)?;
    Ok(ChunkPair {
        chunk_id: chunk.chunk_id.clone(),
        text: chunk.text.clone(),
        score_unlearned: su.value,
        score_original: so.value,
        ratio,
        suspicious,
    })
}

/// Lowercased words with punctuation trimmed from both ends; empty tokens vanish.
pub fn normalize_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Word-level longest common subsequence over the reference length.
pub fn rouge_l_recall(candidate: &str, reference: &str) -> Result<f64> {
    let r = normalize_words(reference);
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    let c = normalize_words(candidate);
    Ok(lcs_len(&c, &r) as f64 / r.len() as f64)
}

/// One line of the question-answer audit input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaInput {
    pub question: String,
    pub reference_answer: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAAuditRecord {
    pub question: String,
    pub reference_answer: String,
    pub candidate_answers: Vec<String>,
    /// Best recall over the candidates.
    pub rouge_l_recall: f64,
    pub score_unlearned: f64,
    pub score_original: f64,
    pub ratio: f64,
    pub selected_by_filter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaAuditReport {
    pub band: f64,
    pub records: Vec<QAAuditRecord>,
    pub n_selected: usize,
    pub n_unselected: usize,
    /// Absent when the group is empty.
    pub selected_mean_recall: Option<f64>,
    pub unselected_mean_recall: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Filters questions by score ratio and compares answer leakage between the groups.
///
/// `scores[i]` holds the `(unlearned, original)` Min-K% values of question `i`.
/// Records come back sorted by recall, highest first.
pub fn audit_questions(inputs: &[QaInput], scores: &[(f64, f64)], band: f64) -> Result<QaAuditReport> {
    if inputs.len() != scores.len() {
        return Err(Error::LengthMismatch {
            expected: inputs.len(),
            got: scores.len(),
        });
    }
    let mut records = Vec::with_capacity(inputs.len());
    for (q, &(su, so)) in inputs.iter().zip(scores) {
        if q.candidates.is_empty() {
            return Err(Error::InvalidExample {
                id: q.question.clone(),
                reason: "no candidate answers".into(),
            });
        }
        let (ratio, selected) = ratio_from_values(su, so, band)?;
        let mut best = 0.0f64;
        for c in &q.candidates {
            best = best.max(rouge_l_recall(c, &q.reference_answer)?);
        }
        records.push(QAAuditRecord {
            question: q.question.clone(),
            reference_answer: q.reference_answer.clone(),
            candidate_answers: q.candidates.clone(),
            rouge_l_recall: best,
            score_unlearned: su,
            score_original: so,
            ratio,
            selected_by_filter: selected,
        });
    }
    records.sort_by(|a, b| {
        b.rouge_l_recall
            .partial_cmp(&a.rouge_l_recall)
            .unwrap_or(Ordering::Equal)
    });
    let selected = || records.iter().filter(|r| r.selected_by_filter);
    let unselected = || records.iter().filter(|r| !r.selected_by_filter);
    Ok(QaAuditReport {
        band,
        n_selected: selected().count(),
        n_unselected: unselected().count(),
        selected_mean_recall: mean(selected().map(|r| r.rouge_l_recall)),
        unselected_mean_recall: mean(unselected().map(|r| r.rouge_l_recall)),
        records,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn chunk_pairs_csv(pairs: &[ChunkPair]) -> String {
    let mut out = String::from("chunk_id,score_unlearned,score_original,ratio,suspicious\n");
    for p in pairs {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{}",
            p.chunk_id, p.score_unlearned, p.score_original, p.ratio, p.suspicious
        );
    }
    out
}

pub fn qa_report_csv(report: &QaAuditReport) -> String {
    let mut out = String::from("question,ratio,suspicious,recall\n");
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{:.6},{},{:.6}",
            csv_field(&r.question),
            r.ratio,
            r.selected_by_filter,
            r.rouge_l_recall
        );
    }
    out
}
