//! Remote log-probability service client.
//!
//! The native wire contract is
//!
//! ```text
//! POST {"model": <string>, "text": <string>}
//!   -> 200 {"tokens": [<string>], "logprobs": [<number>]}
//! ```
//!
//! Services that follow the "echo" completion style are reached through
//! [`HttpProtocol::EchoCompletion`], which sends
//! `{"model", "prompt": text, "max_tokens": 0, "echo": true, "logprobs": 0}` and
//! reads `choices[0].logprobs.tokens` / `choices[0].logprobs.token_logprobs`.
//!
//! Such services usually report `null` for the first token because it has no
//! prefix. A `null` at position 0 is dropped (the sequence shrinks by one and
//! the backend id gains a `+drop0` suffix); `null` anywhere else, a positive or
//! non-finite log-probability, or a token/log-prob length mismatch is rejected
//! as [`Error::MalformedResponse`].

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backends::TokenLogProbs;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HttpProtocol {
    #[default]
    Native,
    EchoCompletion,
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    protocol: HttpProtocol,
    retry_limit: u32,
    backoff: Duration,
    max_parallel: usize,
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

impl HttpBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        protocol: HttpProtocol,
        timeout: Duration,
        retry_limit: u32,
        backoff: Duration,
        max_parallel: usize,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.into(),
            model: model.into(),
            protocol,
            retry_limit,
            backoff,
            max_parallel: max_parallel.max(1),
        }
    }

    pub fn backend_id(&self) -> String {
        format!("http:{}", self.model)
    }

    pub fn max_parallel(&self) -> usize {
        self.max_parallel
    }

    fn request_body(&self, text: &str) -> Value {
        match self.protocol {
            HttpProtocol::Native => json!({ "model": self.model, "text": text }),
            HttpProtocol::EchoCompletion => json!({
                "model": self.model,
                "prompt": text,
                "max_tokens": 0,
                "echo": true,
                "logprobs": 0,
            }),
        }
    }

    fn attempt(&self, text: &str) -> std::result::Result<Value, Attempt> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(self.request_body(text))
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status != 200 {
            return Err(Attempt::Fatal(Error::BackendUnavailable {
                attempts: 1,
                message: format!("HTTP {status}"),
            }));
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| Attempt::Fatal(Error::MalformedResponse(format!("invalid JSON body: {e}"))))
    }

    pub fn score(&self, text: &str) -> Result<TokenLogProbs> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let mut last = String::new();
        for attempt in 0..=self.retry_limit {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(text) {
                Ok(body) => {
                    return parse_response(self.protocol, &body, text, &self.backend_id());
                }
                Err(Attempt::Fatal(Error::BackendUnavailable { message, .. })) => {
                    return Err(Error::BackendUnavailable {
                        attempts: attempt + 1,
                        message,
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::debug!("attempt {} against {} failed: {msg}", attempt + 1, self.endpoint);
                    last = msg;
                }
            }
        }
        Err(Error::BackendUnavailable {
            attempts: self.retry_limit + 1,
            message: last,
        })
    }

    /// Scores `texts` with at most `max_parallel` requests in flight; results keep input order.
    pub fn score_batch(&self, texts: &[String]) -> Vec<Result<TokenLogProbs>> {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<TokenLogProbs>>>> = Mutex::new((0..texts.len()).map(|_| None).collect());
        let workers = self.max_parallel.min(texts.len());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    let Some(text) = texts.get(idx) else { break };
                    let result = self.score(text);
                    slots.lock().expect("result slots poisoned")[idx] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots poisoned")
            .into_iter()
            .map(|slot| slot.expect("every index scored"))
            .collect()
    }
}

/// Maps a decoded response body onto [`TokenLogProbs`], enforcing the wire contract.
pub fn parse_response(protocol: HttpProtocol, body: &Value, text: &str, backend_id: &str) -> Result<TokenLogProbs> {
    let (tokens, logprobs) = match protocol {
        HttpProtocol::Native => (&body["tokens"], &body["logprobs"]),
        HttpProtocol::EchoCompletion => {
            let lp = &body["choices"][0]["logprobs"];
            (&lp["tokens"], &lp["token_logprobs"])
        }
    };
    let tokens: Vec<String> =
        serde_json::from_value(tokens.clone()).map_err(|e| Error::MalformedResponse(format!("tokens: {e}")))?;
    let raw: Vec<Option<f64>> =
        serde_json::from_value(logprobs.clone()).map_err(|e| Error::MalformedResponse(format!("logprobs: {e}")))?;
    if tokens.len() != raw.len() {
        return Err(Error::MalformedResponse(format!(
            "{} tokens but {} logprobs",
            tokens.len(),
            raw.len()
        )));
    }
    let (tokens, raw, id) = match raw.first() {
        Some(None) => (tokens[1..].to_vec(), &raw[1..], format!("{backend_id}+drop0")),
        _ => (tokens, &raw[..], backend_id.to_string()),
    };
    let mut logprobs = Vec::with_capacity(raw.len());
    for (i, lp) in raw.iter().enumerate() {
        match lp {
            Some(v) if v.is_finite() && *v <= 0.0 => logprobs.push(*v),
            Some(v) => return Err(Error::MalformedResponse(format!("logprob {v} at position {i}"))),
            None => return Err(Error::MalformedResponse(format!("null logprob at position {i}"))),
        }
    }
    if logprobs.is_empty() {
        return Err(Error::MalformedResponse("no scored tokens".into()));
    }
    TokenLogProbs::new(text, tokens, logprobs, id)
}
