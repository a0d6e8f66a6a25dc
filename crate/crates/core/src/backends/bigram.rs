//! Add-α smoothed word bigram model.
//!
//! Training is counting: every document is split on whitespace and prefixed
//! with a beginning-of-document context. The conditional probability of a word
//! `v` after context `u` is
//!
//! ```text
//! p(v | u) = (c(u, v) + α) / (c(u) + α·V)
//! ```
//!
//! where `c(u)` counts how often `u` occurs as a context (it is followed by
//! another word in the same document) and `V` is the vocabulary size
//! including the `<unk>` sentinel but excluding the beginning-of-document
//! symbol, which is never predicted.

use std::collections::HashMap;

use crate::backends::TokenLogProbs;
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";

const UNK_ID: u32 = 0;
const BOS_ID: u32 = u32::MAX;

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BigramLM {
    ids: HashMap<String, u32>,
    words: Vec<String>,
    context_counts: Vec<u64>,
    bos_count: u64,
    bigram_counts: HashMap<(u32, u32), u64>,
    alpha: f64,
    total_words: u64,
}

/// Counts bigrams over `corpus` and returns the smoothed model.
pub fn train_bigram<S: AsRef<str>>(corpus: &[S], alpha: f64) -> Result<BigramLM> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let mut lm = BigramLM {
        ids: HashMap::from([(UNK.to_string(), UNK_ID)]),
        words: vec![UNK.to_string()],
        context_counts: vec![0],
        bos_count: 0,
        bigram_counts: HashMap::new(),
        alpha,
        total_words: 0,
    };
    let mut any = false;
    for doc in corpus {
        any |= lm.add_document(doc.as_ref());
    }
    if !any {
        return Err(Error::EmptyCorpus);
    }
    Ok(lm)
}

impl BigramLM {
    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.ids.insert(word.to_string(), id);
        self.words.push(word.to_string());
        self.context_counts.push(0);
        id
    }

    fn add_document(&mut self, doc: &str) -> bool {
        let mut prev = BOS_ID;
        let mut seen = false;
        for word in doc.split_whitespace() {
            let id = self.intern(word);
            *self.bigram_counts.entry((prev, id)).or_insert(0) += 1;
            if prev == BOS_ID {
                self.bos_count += 1;
            } else {
                self.context_counts[prev as usize] += 1;
            }
            self.total_words += 1;
            prev = id;
            seen = true;
        }
        seen
    }

    fn lookup(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or(UNK_ID)
    }

    fn context_id(&self, context: Option<&str>) -> u32 {
        context.map_or(BOS_ID, |w| self.lookup(w))
    }

    fn count_of_context(&self, ctx: u32) -> u64 {
        if ctx == BOS_ID {
            self.bos_count
        } else {
            self.context_counts[ctx as usize]
        }
    }

    fn log_prob_ids(&self, ctx: u32, word: u32) -> f64 {
        let pair = self.bigram_counts.get(&(ctx, word)).copied().unwrap_or(0) as f64;
        let denom = self.count_of_context(ctx) as f64 + self.alpha * self.vocab_size() as f64;
        ((pair + self.alpha) / denom).ln()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Vocabulary size `V`: observed word types plus `<unk>`.
    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    /// Total number of word tokens seen during training.
    pub fn total_words(&self) -> u64 {
        self.total_words
    }

    /// Vocabulary in first-seen order, starting with `<unk>`.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Times `word` occurred as a context. `None` is the beginning of a document.
    pub fn context_count(&self, word: Option<&str>) -> u64 {
        match word {
            Some(w) if !self.ids.contains_key(w) => 0,
            other => self.count_of_context(self.context_id(other)),
        }
    }

    pub fn bigram_count(&self, context: Option<&str>, word: &str) -> u64 {
        if context.is_some_and(|c| !self.ids.contains_key(c)) || !self.ids.contains_key(word) {
            return 0;
        }
        let key = (self.context_id(context), self.lookup(word));
        self.bigram_counts.get(&key).copied().unwrap_or(0)
    }

    /// Natural-log probability of `word` following `context` (`None` = start of document).
    /// Unknown words on either side map to `<unk>`.
    pub fn log_prob(&self, context: Option<&str>, word: &str) -> f64 {
        self.log_prob_ids(self.context_id(context), self.lookup(word))
    }

    pub fn prob(&self, context: Option<&str>, word: &str) -> f64 {
        self.log_prob(context, word).exp()
    }

    /// Scores every whitespace token of `text` against its left neighbour.
    pub fn score(&self, text: &str) -> Result<TokenLogProbs> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        let mut prev = BOS_ID;
        for word in text.split_whitespace() {
            let id = self.lookup(word);
            logprobs.push(self.log_prob_ids(prev, id));
            tokens.push(word.to_string());
            prev = id;
        }
        TokenLogProbs::new(text, tokens, logprobs, self.backend_id())
    }

    /// Total log-likelihood of `text` in nats.
    pub fn log_likelihood(&self, text: &str) -> f64 {
        let mut prev = BOS_ID;
        let mut total = 0.0;
        for word in text.split_whitespace() {
            let id = self.lookup(word);
            total += self.log_prob_ids(prev, id);
            prev = id;
        }
        total
    }

    pub fn backend_id(&self) -> String {
        format!("bigram(alpha={},V={})", self.alpha, self.vocab_size())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn counts_on_four_word_corpus() {
        let lm = train_bigram(&["a b a b"], 0.1).unwrap();
        assert_eq!(lm.vocab_size(), 3);
        assert_eq!(lm.bigram_count(Some("a"), "b"), 2);
        assert_eq!(lm.context_count(Some("a")), 2);
        assert_eq!(lm.context_count(Some("b")), 1);
        assert_eq!(lm.context_count(None), 1);
        assert!(close(lm.prob(Some("a"), "b"), 2.1 / 2.3));
    }

    #[test]
    fn single_word_document() {
        let lm = train_bigram(&["x"], 1.0).unwrap();
        assert!(close(lm.prob(None, "x"), 2.0 / 3.0));
    }

    #[test]
    fn score_uses_bos_then_bigrams() {
        let lm = train_bigram(&["a b a b"], 0.1).unwrap();
        let scored = lm.score("a b").unwrap();
        assert_eq!(scored.tokens, ["a", "b"]);
        // c(BOS,a)=1, c(BOS)=1
        assert!(close(scored.logprobs[0], (1.1f64 / 1.3).ln()));
        assert!((scored.logprobs[1] - (-0.0910)).abs() < 5e-5);
        assert!(close(scored.logprobs[1], (2.1f64 / 2.3).ln()));
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let lm = train_bigram(&["a b"], 0.5).unwrap();
        assert!(close(lm.log_prob(Some("a"), "zzz"), lm.log_prob(Some("a"), UNK)));
        // unseen context falls back to a uniform distribution
        assert!(close(lm.prob(Some("zzz"), "a"), 1.0 / 3.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let empty: [&str; 0] = [];
        assert!(matches!(train_bigram(&empty, 0.1), Err(Error::EmptyCorpus)));
        assert!(matches!(train_bigram(&["  ", ""], 0.1), Err(Error::EmptyCorpus)));
        assert!(matches!(train_bigram(&["a"], 0.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(train_bigram(&["a"], f64::NAN), Err(Error::InvalidAlpha(_))));
        let lm = train_bigram(&["a"], 0.1).unwrap();
        assert!(matches!(lm.score(" \n"), Err(Error::EmptyText)));
    }
}
