use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("cannot build a sampler: {0}")]
    DegenerateWeights(String),

    #[error("zero matrix has no rate constants or projector")]
    ZeroMatrix,

    #[error("scenario {scenario} does not admit m={m}, n={n}, k={k}: {reason}")]
    Scenario {
        scenario: String,
        m: usize,
        n: usize,
        k: usize,
        reason: String,
    },

    #[error("left null space is trivial; no inconsistent right-hand side exists")]
    TrivialNullSpace,

    #[error("unsupported interlacing pair {0}")]
    UnsupportedPair(String),

    #[error("method {method} cannot run on a {system} system")]
    Incompatible { method: String, system: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
