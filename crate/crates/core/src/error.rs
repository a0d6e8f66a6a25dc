use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("text is empty after trimming whitespace")]
    EmptyText,
    #[error("training corpus has no non-empty document")]
    EmptyCorpus,
    #[error("smoothing constant must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("invalid token log-probabilities: {0}")]
    InvalidLogProbs(String),
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: u32, message: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("no precomputed record for text {0:?}")]
    MissingRecord(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("k percent must lie in (0, 100], got {0}")]
    InvalidK(f64),
    #[error("compression failed: {0}")]
    CompressionFailure(#[source] std::io::Error),
    #[error("lowered scoring does not match lowercase of the original text")]
    CaseMismatch,
    #[error("the two scorings cover different texts")]
    TextMismatch,
    #[error("neighbor set is empty")]
    EmptyNeighborSet,
    #[error("invalid neighbor set: {0}")]
    InvalidNeighborSet(String),
    #[error("text needs at least two words to perturb")]
    TooShort,
    #[error("requested {requested} distinct neighbors but only {available} exist")]
    InsufficientPerturbations { requested: usize, available: usize },

    #[error("evaluation needs both members and non-members ({members} members, {nonmembers} non-members)")]
    DegenerateLabels { members: usize, nonmembers: usize },
    #[error("document {0:?} has no snippet scores")]
    EmptyDocument(String),
    #[error("score must be finite, got {0}")]
    NonFiniteScore(f64),

    #[error("page source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("insufficient pages: {members} member and {nonmembers} non-member candidates")]
    InsufficientPages { members: usize, nonmembers: usize },
    #[error("paraphrases reference unknown original ids: {0:?}")]
    DanglingReference(Vec<String>),
    #[error("invalid labeled example {id:?}: {reason}")]
    InvalidExample { id: String, reason: String },

    #[error("invalid contamination spec: {0}")]
    InvalidSpec(String),
    #[error("held-out examples overlap the contaminants: {0:?}")]
    DisjointnessViolation(Vec<String>),

    #[error("input text is empty")]
    EmptyInput,
    #[error("reference answer has no words")]
    EmptyReference,
    #[error("min-k score has non-positive negative log-likelihood ({0})")]
    DegenerateScore(f64),
    #[error("ratio band must be greater than 1, got {0}")]
    InvalidBand(f64),
    #[error("expected {expected} score pairs, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyText => "EmptyText",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::InvalidAlpha(_) => "InvalidAlpha",
            Error::InvalidLogProbs(_) => "InvalidLogProbs",
            Error::BackendUnavailable { .. } => "BackendUnavailable",
            Error::MalformedResponse(_) => "MalformedResponse",
            Error::MissingRecord(_) => "MissingRecord",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::InvalidK(_) => "InvalidK",
            Error::CompressionFailure(_) => "CompressionFailure",
            Error::CaseMismatch => "CaseMismatch",
            Error::TextMismatch => "TextMismatch",
            Error::EmptyNeighborSet => "EmptyNeighborSet",
            Error::InvalidNeighborSet(_) => "InvalidNeighborSet",
            Error::TooShort => "TooShort",
            Error::InsufficientPerturbations { .. } => "InsufficientPerturbations",
            Error::DegenerateLabels { .. } => "DegenerateLabels",
            Error::EmptyDocument(_) => "EmptyDocument",
            Error::NonFiniteScore(_) => "NonFiniteScore",
            Error::SourceUnavailable(_) => "SourceUnavailable",
            Error::InsufficientPages { .. } => "InsufficientPages",
            Error::DanglingReference(_) => "DanglingReference",
            Error::InvalidExample { .. } => "InvalidExample",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::DisjointnessViolation(_) => "DisjointnessViolation",
            Error::EmptyInput => "EmptyInput",
            Error::EmptyReference => "EmptyReference",
            Error::DegenerateScore(_) => "DegenerateScore",
            Error::InvalidBand(_) => "InvalidBand",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "Parse",
        }
    }
}
