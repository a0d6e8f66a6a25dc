//! Benchmark construction: labeled examples, length buckets, paraphrase
//! pairing and fixed-length snippets from long documents.

pub mod wiki;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::Label;
use crate::jsonl::read_jsonl;

pub use wiki::{build_wikimia, MediaWikiSource, SnapshotSource, WikiMiaConfig, WikiPage, WikiSource};

/// Length buckets in words.
pub const DEFAULT_BUCKETS: [usize; 4] = [32, 64, 128, 256];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    #[default]
    Original,
    Paraphrase,
}

/// One benchmark record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_bucket: Option<usize>,
    #[serde(default)]
    pub setting: Setting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paraphrase_of: Option<String>,
    /// Source document for snippets cut from a longer text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
}

impl LabeledExample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            created_at: None,
            length_bucket: None,
            setting: Setting::Original,
            paraphrase_of: None,
            doc_id: None,
        }
    }

    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }

    /// Setting and length bucket as one label, e.g. `original-64`.
    pub fn setting_key(&self) -> String {
        let setting = match self.setting {
            Setting::Original => "original",
            Setting::Paraphrase => "paraphrase",
        };
        match self.length_bucket {
            Some(l) => format!("{setting}-{l}"),
            None => setting.to_string(),
        }
    }
}

/// Checks per-example invariants and that paraphrase links resolve to originals.
pub fn validate_examples(examples: &[LabeledExample]) -> Result<()> {
    let originals: BTreeSet<&str> = examples
        .iter()
        .filter(|e| e.setting == Setting::Original)
        .map(|e| e.id.as_str())
        .collect();
    for e in examples {
        let bad = |reason: String| Error::InvalidExample {
            id: e.id.clone(),
            reason,
        };
        if let Some(l) = e.length_bucket {
            let n = e.word_count();
            if n != l {
                return Err(bad(format!("bucket {l} but {n} words")));
            }
        }
        match (e.setting, &e.paraphrase_of) {
            (Setting::Paraphrase, None) => return Err(bad("paraphrase without a source".into())),
            (Setting::Paraphrase, Some(src)) if !originals.contains(src.as_str()) => {
                return Err(bad(format!("paraphrase of unknown original {src:?}")))
            }
            (Setting::Original, Some(_)) => return Err(bad("original example carries paraphrase_of".into())),
            _ => {}
        }
    }
    Ok(())
}

/// First `n` whitespace words of `text`, joined by single spaces.
pub fn truncate_words(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketOutcome {
    pub examples: Vec<LabeledExample>,
    /// Inputs shorter than the smallest bucket.
    pub dropped: usize,
}

/// Emits one truncation per bucket the example is long enough for.
pub fn bucket_lengths(examples: &[LabeledExample], buckets: &[usize]) -> Result<BucketOutcome> {
    if buckets.is_empty() || buckets.contains(&0) || !buckets.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::ConfigInvalid(
            "buckets must be positive and strictly ascending".into(),
        ));
    }
    let mut out = Vec::new();
    let mut dropped = 0;
    for e in examples {
        let words = e.word_count();
        if words < buckets[0] {
            dropped += 1;
            continue;
        }
        for &l in buckets.iter().take_while(|&&l| l <= words) {
            out.push(LabeledExample {
                id: format!("{}@{l}", e.id),
                text: truncate_words(&e.text, l),
                length_bucket: Some(l),
                ..e.clone()
            });
        }
    }
    if dropped > 0 {
        log::info!("dropped {dropped} example(s) shorter than {} words", buckets[0]);
    }
    Ok(BucketOutcome { examples: out, dropped })
}

/// One line of a paraphrase file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseRecord {
    pub id: String,
    pub text: String,
}

pub fn read_paraphrase_file(path: impl AsRef<Path>) -> Result<Vec<ParaphraseRecord>> {
    read_jsonl(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParaphraseOutcome {
    /// Originals followed by the new paraphrase-setting examples.
    pub examples: Vec<LabeledExample>,
    /// Original ids that received no paraphrase.
    pub unmatched: Vec<String>,
}

/// Adds a paraphrase-setting example for each record, inheriting the original's label.
pub fn attach_paraphrases(originals: &[LabeledExample], paraphrases: &[ParaphraseRecord]) -> Result<ParaphraseOutcome> {
    let by_id: HashMap<&str, &LabeledExample> = originals
        .iter()
        .filter(|e| e.setting == Setting::Original)
        .map(|e| (e.id.as_str(), e))
        .collect();
    let dangling: Vec<String> = paraphrases
        .iter()
        .filter(|p| !by_id.contains_key(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    if !dangling.is_empty() {
        return Err(Error::DanglingReference(dangling));
    }
    let mut per_original: BTreeMap<&str, usize> = BTreeMap::new();
    let mut added = Vec::with_capacity(paraphrases.len());
    for p in paraphrases {
        let src = by_id[p.id.as_str()];
        let n = per_original.entry(&src.id).or_insert(0);
        let suffix = if *n == 0 { String::new() } else { format!("-{n}") };
        *n += 1;
        added.push(LabeledExample {
            id: format!("{}~para{suffix}", src.id),
            text: p.text.clone(),
            label: src.label,
            created_at: src.created_at,
            length_bucket: None,
            setting: Setting::Paraphrase,
            paraphrase_of: Some(src.id.clone()),
            doc_id: src.doc_id.clone(),
        });
    }
    let unmatched = originals
        .iter()
        .filter(|e| e.setting == Setting::Original && !per_original.contains_key(e.id.as_str()))
        .map(|e| e.id.clone())
        .collect();
    let mut examples = originals.to_vec();
    examples.extend(added);
    Ok(ParaphraseOutcome { examples, unmatched })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetSpec {
    pub snippet_words: usize,
    pub snippets_per_doc: usize,
    pub seed: u64,
}

impl Default for SnippetSpec {
    fn default() -> Self {
        Self {
            snippet_words: 512,
            snippets_per_doc: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnippetOutcome {
    pub examples: Vec<LabeledExample>,
    /// Documents with fewer than `snippet_words` words.
    pub too_short: Vec<String>,
}

/// FNV-1a, used to give each document its own stable random stream.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Start offsets of the snippets of a document with `words` words.
pub fn snippet_offsets(doc_id: &str, words: usize, spec: &SnippetSpec) -> Vec<usize> {
    let starts = words + 1 - spec.snippet_words;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(doc_id.as_bytes()));
    let mut offsets: Vec<usize> = if spec.snippets_per_doc <= starts {
        index::sample(&mut rng, starts, spec.snippets_per_doc).into_vec()
    } else {
        (0..spec.snippets_per_doc)
            .map(|_| rng.random_range(0..starts))
            .collect()
    };
    offsets.sort_unstable();
    offsets
}

/// Cuts `snippets_per_doc` random contiguous windows of exactly `snippet_words` words from each document.
///
/// Offsets are drawn without replacement when the document has enough distinct starts.
pub fn extract_snippets(documents: &[(String, String)], spec: &SnippetSpec, label: Label) -> Result<SnippetOutcome> {
    if spec.snippet_words == 0 || spec.snippets_per_doc == 0 {
        return Err(Error::ConfigInvalid("snippet length and count must be positive".into()));
    }
    let mut examples = Vec::new();
    let mut too_short = Vec::new();
    for (doc_id, text) in documents {
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.len() < spec.snippet_words {
            log::warn!("document {doc_id:?} has {} words, skipping", words.len());
            too_short.push(doc_id.clone());
            continue;
        }
        for (i, start) in snippet_offsets(doc_id, words.len(), spec).into_iter().enumerate() {
            examples.push(LabeledExample {
                id: format!("{doc_id}#{i}@{start}"),
                text: words[start..start + spec.snippet_words].join(" "),
                doc_id: Some(doc_id.clone()),
                ..LabeledExample::new("", "", label)
            });
        }
    }
    Ok(SnippetOutcome { examples, too_short })
}
