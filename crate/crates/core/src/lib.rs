//! Reference-free pretraining data detection.
//!
//! Given per-token log-probabilities of a text under a language model, the
//! [`detectors`] decide how likely the text was part of the model's training
//! data. Min-K% Prob averages the log-probabilities of the k% least likely
//! tokens; the baselines (perplexity, zlib, lowercase, reference model,
//! neighborhood) are provided for comparison. The remaining modules obtain
//! log-probabilities ([`backends`]), score detectors ([`evaluation`]), build
//! benchmarks ([`benchmark`]), run contamination experiments
//! ([`contamination`]) and audit unlearned models ([`unlearning`]).

pub mod backends;
pub mod benchmark;
pub mod contamination;
pub mod detectors;
pub mod error;
pub mod evaluation;
pub mod jsonl;
pub mod unlearning;

pub use backends::{Backend, BackendConfig, BackendKind, BigramLM, TokenLogProbs};
pub use benchmark::{LabeledExample, Setting, SnippetSpec};
pub use contamination::{ContamResult, ContamSpec};
pub use detectors::{DetectionScore, Detector, NeighborSet};
pub use error::{Error, Result};
pub use evaluation::{EvalReport, Label, ScoredExample, Threshold};
pub use unlearning::{ChunkPair, QAAuditRecord};
