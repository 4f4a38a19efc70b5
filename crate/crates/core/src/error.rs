//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Error`]. Variants carry
//! enough context (record index, file row, offending value) for a caller to
//! report the failure without re-deriving it.

use thiserror::Error;

/// Errors produced by dataset construction, metric evaluation, fitting, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// The operation needs at least one record.
    #[error("empty dataset")]
    EmptyDataset,

    /// Cost model construction violated `v > c_d` or `c_w < v` (or `k <= 0`
    /// for the normalized form).
    #[error("invalid cost model: {0}")]
    InvalidCostModel(String),

    /// A threshold outside `[0, 1]` (or non-finite).
    #[error("invalid threshold {0}: must lie in [0, 1]")]
    InvalidThreshold(f64),

    /// A record whose confidence is outside `[0, 1]` or non-finite.
    #[error("record {index}: confidence {confidence} outside [0, 1]")]
    ConfidenceOutOfRange { index: usize, confidence: f64 },

    /// A record whose logit is non-finite.
    #[error("record {index}: logit {logit} is not finite")]
    LogitNotFinite { index: usize, logit: f64 },

    /// Temperature fitting needs a logit on every record.
    #[error("logits required: record {index} (id {id:?}) has no logit")]
    LogitsRequired { index: usize, id: String },

    /// Temperature fitting needs both outcome classes present.
    #[error("degenerate labels: dataset is {0}, temperature is unidentifiable")]
    DegenerateLabels(&'static str),

    /// A grouped operation was given a record with no group tag.
    #[error("grouping required: record {index} (id {id:?}) has no group tag")]
    GroupingRequired { index: usize, id: String },

    /// Binning configuration with zero bins.
    #[error("invalid binning: {0}")]
    InvalidBinning(String),

    /// A name that is not in the relevant strategy registry.
    #[error("unknown {family} `{name}`; known: {known}")]
    UnknownStrategy {
        family: &'static str,
        name: String,
        known: String,
    },

    /// Invalid synthetic-data or simulation configuration.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A malformed input file (dataset, rejector document, ...).
    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    /// A required column is missing from a dataset file header.
    #[error("missing column `{column}` in {path}")]
    MissingColumn { path: String, column: String },

    /// A rejector document whose version this build does not understand.
    #[error("unsupported spec version {0} (supported: {1})")]
    UnsupportedSpecVersion(u32, u32),

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Shorthand for results carrying [`Error`].
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attaches a path to a raw I/O error.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
