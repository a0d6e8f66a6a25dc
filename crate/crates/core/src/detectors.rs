//! Membership scores computed from token log-probabilities.
//!
//! Every detector follows one orientation: a higher score means the text is
//! more likely to have been in the model's training data.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::TokenLogProbs;
use crate::error::{Error, Result};
use crate::jsonl::read_jsonl;

/// Default percentage of lowest-probability tokens averaged by Min-K% Prob.
pub const DEFAULT_K_PERCENT: f64 = 20.0;

/// zlib level used for the compression-entropy normalizer.
pub const ZLIB_LEVEL: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    MinKProb,
    Ppl,
    Zlib,
    Lowercase,
    SmallerRef,
    Neighbor,
}

impl Detector {
    pub const ALL: [Detector; 6] = [
        Detector::MinKProb,
        Detector::Ppl,
        Detector::Zlib,
        Detector::Lowercase,
        Detector::SmallerRef,
        Detector::Neighbor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Detector::MinKProb => "min_k_prob",
            Detector::Ppl => "ppl",
            Detector::Zlib => "zlib",
            Detector::Lowercase => "lowercase",
            Detector::SmallerRef => "smaller_ref",
            Detector::Neighbor => "neighbor",
        }
    }
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Detector::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown detector {s:?}")))
    }
}

/// A detector's output before thresholding, with every knob that affected it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub detector: Detector,
    pub value: f64,
    pub params: BTreeMap<String, f64>,
}

impl DetectionScore {
    fn new(detector: Detector, value: f64) -> Self {
        Self {
            detector,
            value,
            params: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// Number of tokens Min-K% Prob averages over: `max(1, floor(k·N/100))`.
pub fn min_k_count(n_tokens: usize, k_percent: f64) -> usize {
    ((k_percent * n_tokens as f64 / 100.0).floor() as usize).clamp(1, n_tokens.max(1))
}

/// Average log-probability of the k% least likely tokens.
///
/// Ties among equal log-probabilities go to the earlier position. The selected
/// values are summed in position order, so `k = 100` reproduces
/// [`ppl_score`] bit for bit.
pub fn min_k_prob(scored: &TokenLogProbs, k_percent: f64) -> Result<DetectionScore> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(Error::InvalidK(k_percent));
    }
    scored.validate()?;
    let lp = &scored.logprobs;
    let count = min_k_count(lp.len(), k_percent);
    let mut order: Vec<usize> = (0..lp.len()).collect();
    // stable: equal values keep position order
    order.sort_by(|&a, &b| lp[a].total_cmp(&lp[b]));
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();
    let sum: f64 = chosen.iter().map(|&i| lp[i]).sum();
    Ok(DetectionScore::new(Detector::MinKProb, sum / count as f64)
        .with("k", k_percent)
        .with("selected", count as f64))
}

/// Mean log-probability (negative cross-entropy); perplexity is recorded in params.
pub fn ppl_score(scored: &TokenLogProbs) -> Result<DetectionScore> {
    scored.validate()?;
    let mean = scored.logprobs.iter().sum::<f64>() / scored.len() as f64;
    Ok(DetectionScore::new(Detector::Ppl, mean).with("perplexity", (-mean).exp()))
}

/// Size in bits of the zlib stream (level 6) of `text`'s UTF-8 bytes.
pub fn zlib_entropy_bits(text: &str) -> Result<u64> {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::new(ZLIB_LEVEL));
    enc.write_all(text.as_bytes()).map_err(Error::CompressionFailure)?;
    let compressed = enc.finish().map_err(Error::CompressionFailure)?;
    Ok(8 * compressed.len() as u64)
}

/// Total log-likelihood divided by the zlib entropy of the text.
pub fn zlib_score(scored: &TokenLogProbs) -> Result<DetectionScore> {
    scored.validate()?;
    let bits = zlib_entropy_bits(&scored.text)?;
    Ok(zlib_ratio(scored.total_logprob(), bits))
}

fn zlib_ratio(total_logprob: f64, bits: u64) -> DetectionScore {
    DetectionScore::new(Detector::Zlib, total_logprob / bits as f64).with("zlib_bits", bits as f64)
}

/// Mean log-probability of the original minus that of its lowercased form.
pub fn lowercase_score(original: &TokenLogProbs, lowered: &TokenLogProbs) -> Result<DetectionScore> {
    original.validate()?;
    lowered.validate()?;
    if lowered.text != original.text.to_lowercase() {
        return Err(Error::CaseMismatch);
    }
    Ok(DetectionScore::new(
        Detector::Lowercase,
        original.mean_logprob() - lowered.mean_logprob(),
    ))
}

/// Mean log-probability under the target model minus that under a reference model.
pub fn smaller_ref_score(target: &TokenLogProbs, reference: &TokenLogProbs) -> Result<DetectionScore> {
    target.validate()?;
    reference.validate()?;
    if target.text != reference.text {
        return Err(Error::TextMismatch);
    }
    Ok(DetectionScore::new(
        Detector::SmallerRef,
        target.mean_logprob() - reference.mean_logprob(),
    ))
}

/// Mean log-probability of the original minus the average over its neighbors.
pub fn neighbor_score(original: &TokenLogProbs, neighbors: &[TokenLogProbs]) -> Result<DetectionScore> {
    original.validate()?;
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighborSet);
    }
    let mut total = 0.0;
    for n in neighbors {
        n.validate()?;
        total += n.mean_logprob();
    }
    let neighbor_mean = total / neighbors.len() as f64;
    Ok(
        DetectionScore::new(Detector::Neighbor, original.mean_logprob() - neighbor_mean)
            .with("n_neighbors", neighbors.len() as f64),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborProvenance {
    File,
    Generated,
}

/// Perturbed variants of one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub original_id: String,
    pub neighbors: Vec<String>,
    pub provenance: NeighborProvenance,
    pub seed: Option<u64>,
}

impl NeighborSet {
    pub fn new(
        original_id: impl Into<String>,
        original_text: &str,
        neighbors: Vec<String>,
        provenance: NeighborProvenance,
        seed: Option<u64>,
    ) -> Result<Self> {
        if neighbors.is_empty() {
            return Err(Error::EmptyNeighborSet);
        }
        if neighbors.iter().any(|n| n == original_text) {
            return Err(Error::InvalidNeighborSet("a neighbor equals the original text".into()));
        }
        Ok(Self {
            original_id: original_id.into(),
            neighbors,
            provenance,
            seed,
        })
    }
}

/// One line of a neighbor file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborRecord {
    pub id: String,
    pub neighbors: Vec<String>,
}

/// Reads `{"id", "neighbors"}` lines keyed by id.
pub fn read_neighbor_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<String>>> {
    let records: Vec<NeighborRecord> = read_jsonl(path)?;
    Ok(records.into_iter().map(|r| (r.id, r.neighbors)).collect())
}

/// All distinct single-edit perturbations: adjacent swaps first, then single-word drops.
pub fn single_edit_perturbations(text: &str) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let original = words.join(" ");
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |candidate: Vec<&str>| {
        let joined = candidate.join(" ");
        if joined != original && !joined.is_empty() && seen.insert(joined.clone()) {
            out.push(joined);
        }
    };
    for i in 0..words.len().saturating_sub(1) {
        let mut w = words.clone();
        w.swap(i, i + 1);
        push(w);
    }
    for i in 0..words.len() {
        let mut w = words.clone();
        w.remove(i);
        push(w);
    }
    out
}

/// Seeded low-fidelity neighbors: each swaps one adjacent word pair or drops one word.
pub fn generate_neighbors(original_id: &str, text: &str, n: usize, seed: u64) -> Result<NeighborSet> {
    if text.split_whitespace().nth(1).is_none() {
        return Err(Error::TooShort);
    }
    let mut candidates = single_edit_perturbations(text);
    if candidates.len() < n {
        return Err(Error::InsufficientPerturbations {
            requested: n,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    candidates.truncate(n);
    NeighborSet::new(original_id, text, candidates, NeighborProvenance::Generated, Some(seed))
}
