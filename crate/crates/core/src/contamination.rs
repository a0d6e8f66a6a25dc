//! Desk-scale contamination experiments.
//!
//! Contaminant texts are copied into a base corpus a Poisson-distributed
//! number of times, the built-in bigram model is trained on the result, and
//! the detectors are asked to separate inserted contaminants from held-out
//! ones. The count model stands in for continued pretraining of a neural LM:
//! memorization grows with the number of copies, but there is no learning
//! rate and the smoothing constant is not a substitute for one.
//!
//! The [`SyntheticLanguage`] generator supplies base corpora and contaminants
//! when no real corpus is at hand.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::backends::bigram::{train_bigram, DEFAULT_ALPHA};
use crate::detectors::{min_k_prob, ppl_score, zlib_score, DEFAULT_K_PERCENT};
use crate::error::{Error, Result};
use crate::evaluation::{auc, Label, ScoredExample};

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// Description of one contaminated-corpus run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContamSpec {
    pub base_corpus: Vec<String>,
    /// `(id, text)` pairs inserted into the corpus.
    pub contaminants: Vec<(String, String)>,
    pub occurrence_lambda: f64,
    /// Base documents are taken in order until at least this many words are collected.
    pub base_token_target: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl ContamSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.occurrence_lambda >= 0.0 && self.occurrence_lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "occurrence lambda must be finite and non-negative, got {}",
                self.occurrence_lambda
            )));
        }
        if self.base_token_target == 0 {
            return Err(Error::InvalidSpec("base_token_target must be positive".into()));
        }
        if let Some((id, _)) = self.contaminants.iter().find(|(_, t)| t.trim().is_empty()) {
            return Err(Error::InvalidSpec(format!("contaminant {id:?} is empty")));
        }
        let mut ids = HashSet::new();
        if let Some((id, _)) = self.contaminants.iter().find(|(id, _)| !ids.insert(id.as_str())) {
            return Err(Error::InvalidSpec(format!("duplicate contaminant id {id:?}")));
        }
        let available: usize = self.base_corpus.iter().map(|d| word_count(d)).sum();
        if available < self.base_token_target {
            return Err(Error::InvalidSpec(format!(
                "base corpus has {available} words, target is {}",
                self.base_token_target
            )));
        }
        Ok(())
    }

    /// Prefix of the base corpus reaching `base_token_target` words.
    pub fn assembled_base(&self) -> &[String] {
        let mut words = 0;
        for (i, doc) in self.base_corpus.iter().enumerate() {
            words += word_count(doc);
            if words >= self.base_token_target {
                return &self.base_corpus[..=i];
            }
        }
        &self.base_corpus
    }
}

fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedCorpus {
    pub documents: Vec<String>,
    /// Copies of each contaminant actually inserted, keyed by id.
    pub ledger: BTreeMap<String, u64>,
}

/// Per-purpose random stream derived from a run seed.
fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

const STREAM_OCCURRENCE: u64 = 1;
const STREAM_PLACEMENT: u64 = 2;

/// Draws an occurrence count per contaminant and inserts that many copies,
/// each as its own document at a uniformly random position.
pub fn build_contaminated_corpus(spec: &ContamSpec) -> Result<ContaminatedCorpus> {
    spec.validate()?;
    let mut occ_rng = stream(spec.seed, STREAM_OCCURRENCE);
    let counts: Vec<u64> = if spec.occurrence_lambda == 0.0 {
        vec![0; spec.contaminants.len()]
    } else {
        let poisson = Poisson::new(spec.occurrence_lambda).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.contaminants
            .iter()
            .map(|_| poisson.sample(&mut occ_rng) as u64)
            .collect()
    };

    let mut documents = spec.assembled_base().to_vec();
    let mut place_rng = stream(spec.seed, STREAM_PLACEMENT);
    for ((_, text), &count) in spec.contaminants.iter().zip(&counts) {
        for _ in 0..count {
            let at = place_rng.random_range(0..=documents.len());
            documents.insert(at, text.clone());
        }
    }
    let ledger = spec
        .contaminants
        .iter()
        .zip(counts)
        .map(|((id, _), c)| (id.clone(), c))
        .collect();
    Ok(ContaminatedCorpus { documents, ledger })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub id: String,
    pub occurrences: u64,
    pub member: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceBin {
    pub bin: String,
    pub min_occurrences: u64,
    pub max_occurrences: u64,
    pub n_members: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContamResult {
    pub per_example: Vec<ExampleOutcome>,
    /// Members grouped by occurrence count (1, 2-3, 4-7, ...) against all non-members.
    pub auc_by_occurrence: Vec<OccurrenceBin>,
    /// Min-K% Prob AUC over all members and non-members.
    pub overall_auc: f64,
    /// AUC of the single-model baselines (`ppl`, `zlib`).
    pub baseline_auc: BTreeMap<String, f64>,
    pub n_members: usize,
    pub n_nonmembers: usize,
    pub k_percent: f64,
}

fn occurrence_bin(c: u64) -> (u64, u64) {
    let lo = 1u64 << (63 - c.leading_zeros());
    (lo, 2 * lo - 1)
}

/// Trains the bigram model on the contaminated corpus and measures how well
/// the detectors separate inserted contaminants (members) from held-out texts
/// and zero-occurrence contaminants (non-members).
pub fn run_contamination_experiment(
    spec: &ContamSpec,
    holdout: &[(String, String)],
    k_percent: f64,
) -> Result<ContamResult> {
    if holdout.is_empty() {
        return Err(Error::InvalidSpec("holdout set is empty".into()));
    }
    let ids: HashSet<&str> = spec.contaminants.iter().map(|(id, _)| id.as_str()).collect();
    let texts: HashSet<&str> = spec.contaminants.iter().map(|(_, t)| t.as_str()).collect();
    let overlap: Vec<String> = holdout
        .iter()
        .filter(|(id, text)| ids.contains(id.as_str()) || texts.contains(text.as_str()))
        .map(|(id, _)| id.clone())
        .collect();
    if !overlap.is_empty() {
        return Err(Error::DisjointnessViolation(overlap));
    }

    let corpus = build_contaminated_corpus(spec)?;
    let lm = train_bigram(&corpus.documents, spec.alpha)?;

    let candidates = spec
        .contaminants
        .iter()
        .map(|(id, text)| (id, text, corpus.ledger[id]))
        .chain(holdout.iter().map(|(id, text)| (id, text, 0)));
    let mut per_example = Vec::new();
    let mut by_detector: BTreeMap<&str, Vec<ScoredExample>> = BTreeMap::new();
    for (id, text, occurrences) in candidates {
        let scored = lm.score(text)?;
        let label = if occurrences > 0 {
            Label::Member
        } else {
            Label::Nonmember
        };
        let mink = min_k_prob(&scored, k_percent)?.value;
        for (name, value) in [
            ("min_k_prob", mink),
            ("ppl", ppl_score(&scored)?.value),
            ("zlib", zlib_score(&scored)?.value),
        ] {
            by_detector
                .entry(name)
                .or_default()
                .push(ScoredExample::new(id.clone(), value, label));
        }
        per_example.push(ExampleOutcome {
            id: id.clone(),
            occurrences,
            member: occurrences > 0,
            score: mink,
        });
    }

    let main = &by_detector["min_k_prob"];
    let overall_auc = auc(main)?;
    let baseline_auc = by_detector
        .iter()
        .filter(|(name, _)| **name != "min_k_prob")
        .map(|(name, ex)| Ok((name.to_string(), auc(ex)?)))
        .collect::<Result<_>>()?;

    let mut bins: BTreeMap<(u64, u64), Vec<ScoredExample>> = BTreeMap::new();
    let nonmembers: Vec<ScoredExample> = main.iter().filter(|e| !e.label.is_member()).cloned().collect();
    for (ex, outcome) in main.iter().zip(&per_example) {
        if outcome.member {
            bins.entry(occurrence_bin(outcome.occurrences))
                .or_default()
                .push(ex.clone());
        }
    }
    let auc_by_occurrence = bins
        .into_iter()
        .map(|((lo, hi), members)| {
            let n_members = members.len();
            let mut set = members;
            set.extend(nonmembers.iter().cloned());
            Ok(OccurrenceBin {
                bin: if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") },
                min_occurrences: lo,
                max_occurrences: hi,
                n_members,
                auc: auc(&set)?,
            })
        })
        .collect::<Result<_>>()?;

    Ok(ContamResult {
        n_members: main.len() - nonmembers.len(),
        n_nonmembers: nonmembers.len(),
        per_example,
        auc_by_occurrence,
        overall_auc,
        baseline_auc,
        k_percent,
    })
}

/// A seeded Markov-chain language over a Zipfian vocabulary.
///
/// Every word gets a fixed set of likely successors, so text drawn from the
/// same language shares many bigrams while individual documents still carry
/// rare transitions. Languages built with different prefixes have disjoint
/// vocabularies.
#[derive(Debug, Clone)]
pub struct SyntheticLanguage {
    prefix: String,
    start: WeightedIndex<f64>,
    successors: Vec<(Vec<u32>, WeightedIndex<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanguageParams {
    pub vocab_size: usize,
    pub branching: usize,
    pub zipf_exponent: f64,
}

impl Default for LanguageParams {
    fn default() -> Self {
        Self {
            vocab_size: 2000,
            branching: 8,
            zipf_exponent: 1.0,
        }
    }
}

fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    (1..=n).map(|r| (r as f64).powf(-s)).collect()
}

impl SyntheticLanguage {
    pub fn new(prefix: &str, params: LanguageParams, seed: u64) -> Result<Self> {
        if params.vocab_size < 2 || params.branching == 0 {
            return Err(Error::InvalidSpec(
                "synthetic language needs >= 2 words and >= 1 successor".into(),
            ));
        }
        let weights = zipf_weights(params.vocab_size, params.zipf_exponent);
        let start = WeightedIndex::new(&weights).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let succ_weights = zipf_weights(params.branching, params.zipf_exponent);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let successors = (0..params.vocab_size)
            .map(|_| {
                let next: Vec<u32> = (0..params.branching).map(|_| start.sample(&mut rng) as u32).collect();
                let dist = WeightedIndex::new(&succ_weights).expect("positive weights");
                (next, dist)
            })
            .collect();
        Ok(Self {
            prefix: prefix.to_string(),
            start,
            successors,
        })
    }

    pub fn document<R: Rng>(&self, words: usize, rng: &mut R) -> String {
        let mut out = String::new();
        let mut cur = self.start.sample(rng);
        for i in 0..words {
            if i > 0 {
                out.push(' ');
                let (next, dist) = &self.successors[cur];
                cur = next[dist.sample(rng)] as usize;
            }
            let _ = write!(out, "{}{cur}", self.prefix);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContaminantSource {
    /// Contaminants and held-out texts come from the base corpus's own language.
    InDistribution,
    /// Contaminants and held-out texts come from a language with a disjoint vocabulary.
    Outlier,
}

impl std::str::FromStr for ContaminantSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in-distribution" => Ok(Self::InDistribution),
            "outlier" => Ok(Self::Outlier),
            other => Err(Error::ConfigInvalid(format!("unknown contaminant source {other:?}"))),
        }
    }
}

/// Parameters of a synthetic contamination trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    pub base_words: usize,
    pub n_contaminants: usize,
    pub n_holdout: usize,
    pub source: ContaminantSource,
    pub k_percent: f64,
    pub alpha: f64,
    pub language: LanguageParams,
    /// Inclusive word-length range of base documents.
    pub base_doc_words: (usize, usize),
    /// Inclusive word-length range of contaminant and held-out texts.
    pub example_words: (usize, usize),
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            base_words: 100_000,
            n_contaminants: 100,
            n_holdout: 100,
            source: ContaminantSource::InDistribution,
            k_percent: DEFAULT_K_PERCENT,
            alpha: DEFAULT_ALPHA,
            language: LanguageParams::default(),
            base_doc_words: (50, 200),
            example_words: (32, 64),
        }
    }
}

const STREAM_BASE: u64 = 10;
const STREAM_EXAMPLES: u64 = 11;

/// Synthetic inputs of one trial. The base corpus for a larger `base_words`
/// extends the one for a smaller target under the same seed.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub base_corpus: Vec<String>,
    pub contaminants: Vec<(String, String)>,
    pub holdout: Vec<(String, String)>,
}

pub fn synthesize_trial(config: &LabConfig, base_words: usize, seed: u64) -> Result<TrialData> {
    let base_lang = SyntheticLanguage::new("w", config.language, seed)?;
    let mut rng = stream(seed, STREAM_BASE);
    let (lo, hi) = config.base_doc_words;
    if lo == 0 || lo > hi {
        return Err(Error::InvalidSpec("invalid base document length range".into()));
    }
    let mut base_corpus = Vec::new();
    let mut words = 0;
    while words < base_words {
        let n = rng.random_range(lo..=hi);
        base_corpus.push(base_lang.document(n, &mut rng));
        words += n;
    }

    let outlier_lang;
    let example_lang = match config.source {
        ContaminantSource::InDistribution => &base_lang,
        ContaminantSource::Outlier => {
            outlier_lang = SyntheticLanguage::new("x", config.language, seed ^ 0x9e37_79b9)?;
            &outlier_lang
        }
    };
    let (lo, hi) = config.example_words;
    if lo == 0 || lo > hi {
        return Err(Error::InvalidSpec("invalid example length range".into()));
    }
    let mut rng = stream(seed, STREAM_EXAMPLES);
    let mut seen = HashSet::new();
    let mut draw = |prefix: &str, n: usize| -> Vec<(String, String)> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let len = rng.random_range(lo..=hi);
            let text = example_lang.document(len, &mut rng);
            if seen.insert(text.clone()) {
                out.push((format!("{prefix}{}", out.len()), text));
            }
        }
        out
    };
    let contaminants = draw("c", config.n_contaminants);
    let holdout = draw("h", config.n_holdout);
    Ok(TrialData {
        base_corpus,
        contaminants,
        holdout,
    })
}

/// One synthetic trial at the given occurrence rate and base size.
pub fn run_trial(config: &LabConfig, lambda: f64, base_words: usize, seed: u64) -> Result<ContamResult> {
    let data = synthesize_trial(config, base_words, seed)?;
    let spec = ContamSpec {
        base_corpus: data.base_corpus,
        contaminants: data.contaminants,
        occurrence_lambda: lambda,
        base_token_target: base_words,
        seed,
        alpha: config.alpha,
    };
    run_contamination_experiment(&spec, &data.holdout, config.k_percent)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub base_words: usize,
    pub seeds: Vec<u64>,
    pub aucs: Vec<f64>,
    pub mean_auc: f64,
    pub min_auc: f64,
    pub max_auc: f64,
}

impl SweepPoint {
    pub fn new(lambda: f64, base_words: usize, seeds: &[u64], aucs: Vec<f64>) -> Self {
        let mean_auc = aucs.iter().sum::<f64>() / aucs.len() as f64;
        Self {
            lambda,
            base_words,
            seeds: seeds.to_vec(),
            mean_auc,
            min_auc: aucs.iter().copied().fold(f64::INFINITY, f64::min),
            max_auc: aucs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            aucs,
        }
    }
}

/// Runs every `(lambda, base_words)` cell over `seeds`; cells run on separate threads.
pub fn sweep(config: &LabConfig, cells: &[(f64, usize)], seeds: &[u64]) -> Result<Vec<SweepPoint>> {
    if seeds.is_empty() {
        return Err(Error::ConfigInvalid("at least one seed is required".into()));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(lambda, base_words)| {
                scope.spawn(move || {
                    let aucs = seeds
                        .iter()
                        .map(|&s| run_trial(config, lambda, base_words, s).map(|r| r.overall_auc))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(SweepPoint::new(lambda, base_words, seeds, aucs))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

/// AUC as a function of the occurrence rate, with the base size fixed.
pub fn occurrence_sweep(config: &LabConfig, lambdas: &[f64], seeds: &[u64]) -> Result<Vec<SweepPoint>> {
    let cells: Vec<_> = lambdas.iter().map(|&l| (l, config.base_words)).collect();
    sweep(config, &cells, seeds)
}

/// AUC as a function of base corpus size (`scale × base_words`), with the occurrence rate fixed.
pub fn size_sweep(config: &LabConfig, lambda: f64, scales: &[usize], seeds: &[u64]) -> Result<Vec<SweepPoint>> {
    let cells: Vec<_> = scales.iter().map(|&s| (lambda, s * config.base_words)).collect();
    sweep(config, &cells, seeds)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("lambda,base_words,n_seeds,mean_auc,min_auc,max_auc\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            p.lambda,
            p.base_words,
            p.aucs.len(),
            p.mean_auc,
            p.min_auc,
            p.max_auc
        );
    }
    out
}

pub fn occurrence_bins_csv(result: &ContamResult) -> String {
    let mut out = String::from("occurrence_bin,n_members,auc\n");
    for b in &result.auc_by_occurrence {
        let _ = writeln!(out, "{},{},{:.6}", b.bin, b.n_members, b.auc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(lambda: f64, seed: u64) -> ContamSpec {
        ContamSpec {
            base_corpus: (0..20).map(|i| format!("base doc {i} with some words")).collect(),
            contaminants: (0..200)
                .map(|i| (format!("c{i}"), format!("contaminant {i} text")))
                .collect(),
            occurrence_lambda: lambda,
            base_token_target: 60,
            seed,
            alpha: DEFAULT_ALPHA,
        }
    }

    #[test]
    fn zero_rate_leaves_base_untouched() {
        let spec = tiny_spec(0.0, 1);
        let out = build_contaminated_corpus(&spec).unwrap();
        assert!(out.ledger.values().all(|&c| c == 0));
        assert_eq!(out.documents, spec.assembled_base());
    }

    #[test]
    fn assembly_stops_at_target() {
        let spec = tiny_spec(0.0, 1);
        // each base document has 6 words
        assert_eq!(spec.assembled_base().len(), 10);
    }

    #[test]
    fn ledger_is_conserved_and_reproducible() {
        let spec = tiny_spec(4.0, 13);
        let a = build_contaminated_corpus(&spec).unwrap();
        let b = build_contaminated_corpus(&spec).unwrap();
        assert_eq!(a, b);
        let inserted: u64 = a.ledger.values().sum();
        assert_eq!(a.documents.len() as u64, spec.assembled_base().len() as u64 + inserted);
        let mean = inserted as f64 / a.ledger.len() as f64;
        assert!((3.0..=5.0).contains(&mean), "{mean}");
        let base_words: usize = spec.assembled_base().iter().map(|d| word_count(d)).sum();
        let total: usize = a.documents.iter().map(|d| word_count(d)).sum();
        let expected: u64 = spec
            .contaminants
            .iter()
            .map(|(id, t)| a.ledger[id] * word_count(t) as u64)
            .sum();
        assert_eq!(total as u64, base_words as u64 + expected);
    }

    #[test]
    fn invalid_specs() {
        let mut s = tiny_spec(-1.0, 0);
        assert!(s.validate().is_err());
        s.occurrence_lambda = 1.0;
        s.base_token_target = 10_000;
        assert!(s.validate().is_err());
        let mut s = tiny_spec(1.0, 0);
        s.contaminants[0].1 = " ".into();
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn heavy_multiplicity_is_perfectly_separated() {
        let mut spec = tiny_spec(0.0, 3);
        spec.contaminants = (0..10)
            .map(|i| (format!("c{i}"), format!("alpha{i} beta{i} gamma{i} delta{i}")))
            .collect();
        spec.occurrence_lambda = 50.0;
        let holdout: Vec<_> = (0..10)
            .map(|i| (format!("h{i}"), format!("omega{i} psi{i} chi{i} phi{i}")))
            .collect();
        let r = run_contamination_experiment(&spec, &holdout, 20.0).unwrap();
        assert!(r.per_example.iter().filter(|e| e.member).all(|e| e.occurrences > 20));
        assert_eq!(r.overall_auc, 1.0);
        assert_eq!(r, run_contamination_experiment(&spec, &holdout, 20.0).unwrap());
    }

    #[test]
    fn experiment_error_paths() {
        let spec = tiny_spec(0.0, 3);
        let holdout = vec![("h0".to_string(), "unrelated held out text".to_string())];
        assert!(matches!(
            run_contamination_experiment(&spec, &holdout, 20.0),
            Err(Error::DegenerateLabels { members: 0, .. })
        ));
        let clash = vec![("c1".to_string(), "x".to_string())];
        assert!(matches!(
            run_contamination_experiment(&spec, &clash, 20.0),
            Err(Error::DisjointnessViolation(_))
        ));
        let same_text = vec![("h".to_string(), spec.contaminants[0].1.clone())];
        assert!(matches!(
            run_contamination_experiment(&spec, &same_text, 20.0),
            Err(Error::DisjointnessViolation(_))
        ));
        assert!(run_contamination_experiment(&spec, &[], 20.0).is_err());
    }

    #[test]
    fn occurrence_bins_are_powers_of_two() {
        assert_eq!(occurrence_bin(1), (1, 1));
        assert_eq!(occurrence_bin(3), (2, 3));
        assert_eq!(occurrence_bin(4), (4, 7));
        assert_eq!(occurrence_bin(16), (16, 31));
    }

    #[test]
    fn synthetic_language_is_seeded() {
        let lang = SyntheticLanguage::new("w", LanguageParams::default(), 9).unwrap();
        let a = lang.document(20, &mut ChaCha8Rng::seed_from_u64(1));
        let b = lang.document(20, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert_eq!(word_count(&a), 20);
        assert!(a.split(' ').all(|w| w.starts_with('w')));
    }

    #[test]
    fn larger_base_extends_smaller_one() {
        let cfg = LabConfig {
            base_words: 2_000,
            ..Default::default()
        };
        let small = synthesize_trial(&cfg, 2_000, 4).unwrap();
        let large = synthesize_trial(&cfg, 20_000, 4).unwrap();
        assert_eq!(large.base_corpus[..small.base_corpus.len()], small.base_corpus[..]);
        assert_eq!(small.contaminants, large.contaminants);
        assert_eq!(small.holdout, large.holdout);
    }
}
