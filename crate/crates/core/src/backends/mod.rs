//! Sources of per-token log-probabilities.
//!
//! Three interchangeable backends produce [`TokenLogProbs`]: a JSON-lines file
//! of precomputed values, a remote HTTP service, and the built-in bigram model.
//! All log-probabilities are natural logs.

pub mod bigram;
pub mod file;
pub mod http;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bigram::{train_bigram, BigramLM};
pub use file::{LogProbFile, LogProbRecord};
pub use http::{HttpBackend, HttpProtocol};

/// Environment variable that overrides the configured HTTP endpoint.
pub const ENDPOINT_ENV: &str = "PDD_ENDPOINT";
/// Environment variable that overrides the configured model name.
pub const MODEL_ENV: &str = "PDD_MODEL";

/// A text with its tokens and the log-probability of each token given its prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    pub text: String,
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
    pub backend_id: String,
}

impl TokenLogProbs {
    pub fn new(
        text: impl Into<String>,
        tokens: Vec<String>,
        logprobs: Vec<f64>,
        backend_id: impl Into<String>,
    ) -> Result<Self> {
        let scored = Self {
            text: text.into(),
            tokens,
            logprobs,
            backend_id: backend_id.into(),
        };
        scored.validate()?;
        Ok(scored)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::InvalidLogProbs("no tokens".into()));
        }
        if self.tokens.len() != self.logprobs.len() {
            return Err(Error::InvalidLogProbs(format!(
                "{} tokens but {} logprobs",
                self.tokens.len(),
                self.logprobs.len()
            )));
        }
        if let Some((i, v)) = self
            .logprobs
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v <= 0.0))
        {
            return Err(Error::InvalidLogProbs(format!("logprob {v} at position {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }

    pub fn total_logprob(&self) -> f64 {
        self.logprobs.iter().sum()
    }

    pub fn mean_logprob(&self) -> f64 {
        self.total_logprob() / self.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    File,
    Http,
    Bigram,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "file" => Ok(Self::File),
            "http" => Ok(Self::Http),
            "bigram" => Ok(Self::Bigram),
            other => Err(Error::ConfigInvalid(format!("unknown backend kind {other:?}"))),
        }
    }
}

fn default_max_parallel() -> usize {
    4
}
fn default_retry_limit() -> u32 {
    3
}
fn default_timeout_secs() -> f64 {
    30.0
}
fn default_backoff_ms() -> u64 {
    200
}
fn default_alpha() -> f64 {
    bigram::DEFAULT_ALPHA
}

/// How to obtain log-probabilities.
///
/// `path` is the precomputed JSON-lines file for `file` backends and the
/// training corpus (one document per line) for `bigram` backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default)]
    pub protocol: HttpProtocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Deserialize)]
struct ConfigFile {
    backend: BackendConfig,
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> Self {
        Self {
            kind,
            endpoint: None,
            model_name: None,
            max_parallel: default_max_parallel(),
            retry_limit: default_retry_limit(),
            timeout_secs: default_timeout_secs(),
            backoff_ms: default_backoff_ms(),
            protocol: HttpProtocol::default(),
            path: None,
            alpha: default_alpha(),
        }
    }

    pub fn http(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: Some(endpoint.into()),
            model_name: Some(model.into()),
            ..Self::new(BackendKind::Http)
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Parses the `[backend]` table of a TOML document.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let parsed: ConfigFile = toml::from_str(src).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        parsed.backend.validate()?;
        Ok(parsed.backend)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&src)
    }

    /// Applies `PDD_ENDPOINT` / `PDD_MODEL` overrides using `lookup` for variable access.
    pub fn apply_env_with(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(endpoint) = lookup(ENDPOINT_ENV).filter(|s| !s.is_empty()) {
            self.endpoint = Some(endpoint);
        }
        if let Some(model) = lookup(MODEL_ENV).filter(|s| !s.is_empty()) {
            self.model_name = Some(model);
        }
    }

    pub fn apply_env(&mut self) {
        self.apply_env_with(|k| std::env::var(k).ok());
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.endpoint) {
            (BackendKind::Http, None) => return Err(Error::ConfigInvalid("http backend requires an endpoint".into())),
            (BackendKind::File | BackendKind::Bigram, Some(_)) => {
                return Err(Error::ConfigInvalid(
                    "endpoint is only valid for the http backend".into(),
                ))
            }
            _ => {}
        }
        if self.max_parallel == 0 {
            return Err(Error::ConfigInvalid("max_parallel must be positive".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::ConfigInvalid("timeout must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

/// A ready-to-use log-probability source.
#[derive(Debug, Clone)]
pub enum Backend {
    File(LogProbFile),
    Http(HttpBackend),
    Bigram(BigramLM),
}

impl Backend {
    /// Loads the file, trains the bigram model, or prepares the HTTP client.
    pub fn from_config(config: &BackendConfig) -> Result<Self> {
        config.validate()?;
        let need_path = || {
            config
                .path
                .as_ref()
                .ok_or_else(|| Error::ConfigInvalid(format!("{:?} backend requires a path", config.kind)))
        };
        match config.kind {
            BackendKind::File => Ok(Self::File(LogProbFile::load(need_path()?)?)),
            BackendKind::Bigram => {
                let path = need_path()?;
                let corpus = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let docs: Vec<&str> = corpus.lines().collect();
                Ok(Self::Bigram(train_bigram(&docs, config.alpha)?))
            }
            BackendKind::Http => Ok(Self::Http(HttpBackend::new(
                config.endpoint.clone().unwrap_or_default(),
                config.model_name.clone().unwrap_or_default(),
                config.protocol,
                config.timeout(),
                config.retry_limit,
                Duration::from_millis(config.backoff_ms),
                config.max_parallel,
            ))),
        }
    }

    pub fn backend_id(&self) -> String {
        match self {
            Self::File(f) => f.backend_id().to_string(),
            Self::Http(h) => h.backend_id(),
            Self::Bigram(lm) => lm.backend_id(),
        }
    }

    pub fn score_text(&self, text: &str) -> Result<TokenLogProbs> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        match self {
            Self::File(f) => f.score(text),
            Self::Http(h) => h.score(text),
            Self::Bigram(lm) => lm.score(text),
        }
    }

    /// Scores each text independently; failures are reported per item in input order.
    pub fn score_batch(&self, texts: &[String]) -> Vec<Result<TokenLogProbs>> {
        match self {
            Self::Http(h) => h.score_batch(texts),
            _ => texts.iter().map(|t| self.score_text(t)).collect(),
        }
    }
}

pub fn score_text(text: &str, backend: &Backend) -> Result<TokenLogProbs> {
    backend.score_text(text)
}

pub fn score_batch(texts: &[String], backend: &Backend) -> Vec<Result<TokenLogProbs>> {
    backend.score_batch(texts)
}
