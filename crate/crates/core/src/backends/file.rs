//! Precomputed log-probabilities stored as JSON-lines.
//!
//! Each line is `{"id": .., "text": .., "tokens": [..], "logprobs": [..]}`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backends::TokenLogProbs;
use crate::error::{Error, Result};
use crate::jsonl::read_jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbRecord {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LogProbFile {
    backend_id: String,
    by_text: HashMap<String, TokenLogProbs>,
    ids: HashMap<String, String>,
}

impl LogProbFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let records: Vec<LogProbRecord> = read_jsonl(path)?;
        let backend_id = format!("file:{}", path.display());
        Self::from_records(records, backend_id).map_err(|(line, message)| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })
    }

    /// Builds the store from in-memory records; errors carry the 1-based record index.
    pub fn from_records(records: Vec<LogProbRecord>, backend_id: String) -> std::result::Result<Self, (usize, String)> {
        let mut by_text = HashMap::new();
        let mut ids = HashMap::new();
        for (idx, rec) in records.into_iter().enumerate() {
            let scored = TokenLogProbs::new(&rec.text, rec.tokens, rec.logprobs, backend_id.clone())
                .map_err(|e| (idx + 1, e.to_string()))?;
            if by_text.contains_key(&rec.text) {
                log::warn!("duplicate precomputed record for id {:?}; keeping the first", rec.id);
                continue;
            }
            ids.insert(rec.id, rec.text.clone());
            by_text.insert(rec.text, scored);
        }
        Ok(Self {
            backend_id,
            by_text,
            ids,
        })
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn len(&self) -> usize {
        self.by_text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_text.is_empty()
    }

    pub fn score(&self, text: &str) -> Result<TokenLogProbs> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        self.by_text
            .get(text)
            .cloned()
            .ok_or_else(|| Error::MissingRecord(preview(text)))
    }

    pub fn get_by_id(&self, id: &str) -> Option<&TokenLogProbs> {
        self.ids.get(id).and_then(|t| self.by_text.get(t))
    }
}

fn preview(text: &str) -> String {
    const MAX: usize = 60;
    match text.char_indices().nth(MAX) {
        Some((cut, _)) => format!("{}...", &text[..cut]),
        None => text.to_string(),
    }
}
