use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("sample {index} has no ground-truth candidate")]
    MissingGroundTruth { index: usize },

    #[error("{path}:{line}: {msg}")]
    MalformedLine {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("candidate pool too small: needed {needed} distinct distractors, found {found}")]
    PoolExhausted { needed: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },

    #[error("non-finite value in {context} (epoch {epoch}, batch {batch})")]
    NonFinite {
        context: String,
        epoch: usize,
        batch: usize,
    },

    #[error("score set has no _NOTA candidate; direct prediction requires one")]
    NoNotaCandidate,

    #[error("score set contains a _NOTA candidate; threshold detection forbids it")]
    UnexpectedNotaCandidate,

    #[error("feature spec mismatch: model expects {expected} features, got {got}")]
    FeatureSpecMismatch { expected: usize, got: usize },

    #[error("training data contains a single class; need both isNOTA and notNOTA examples")]
    SingleClass,

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}
