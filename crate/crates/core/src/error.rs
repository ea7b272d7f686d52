// SPDX-License-Identifier: MIT OR Apache-2.0

//! Crate-wide error type.
//!
//! Variants are grouped by the subsystem that raises them. [`Error::is_validation`]
//! separates bad inputs (configs, files, degenerate data) from internal faults,
//! which the CLI maps onto distinct exit codes.

use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    // -- numerics --------------------------------------------------------
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero-norm vector cannot be normalized")]
    ZeroVector,
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("rank deficient: column {column} is linearly dependent on earlier columns")]
    RankDeficient { column: usize },
    #[error("basis is not orthonormal (max deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    // -- corpus ----------------------------------------------------------
    #[error("corpus config: {0}")]
    CorpusConfig(String),
    #[error("report has no cue phrase; cannot assign a semantic class")]
    Unclassifiable,
    #[error("line {line}: {message}")]
    CorpusParse { line: usize, message: String },
    #[error("line {line}: invariant `{invariant}` violated")]
    CorpusInvariant { line: usize, invariant: &'static str },
    #[error("corpus is empty")]
    EmptyCorpus,

    // -- model -----------------------------------------------------------
    #[error("model config: {0}")]
    ModelConfig(String),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("steering cancellation: h/|h| + lambda*v has norm {norm:.3e}")]
    Cancellation { norm: f64 },
    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    // -- steering --------------------------------------------------------
    #[error("plan: {0}")]
    Plan(String),
    #[error("plan conflict: a plan is already applied")]
    PlanConflict,

    // -- vectors ---------------------------------------------------------
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("pairing: {0}")]
    Pairing(String),
    #[error("degenerate difference matrix: {0}")]
    Degenerate(String),
    #[error("minimal-edit subset: need {need} pairs, found {found}")]
    Subset { need: usize, found: usize },
    #[error("insufficient classes: need at least 2, have {0}")]
    InsufficientClasses(usize),
    #[error("control vector: {0}")]
    Control(String),

    // -- metrics ---------------------------------------------------------
    #[error("rate undefined for an empty report")]
    EmptyReport,

    // -- bundle ----------------------------------------------------------
    #[error("bundle field `{field}`: {message}")]
    Bundle { field: &'static str, message: String },

    // -- io --------------------------------------------------------------
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid inputs rather than internal faults.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Self::Io { .. } | Self::Diverged { .. })
    }
}
