use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or a violated precondition on user-supplied knobs.
    Validation,
    /// Bad, missing or inconsistent input data.
    Data,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("mask selects no pixels")]
    EmptyRegion,

    #[error("affinity column {column} sums to zero under l1 normalization")]
    DegenerateColumn { column: usize },

    #[error("fusion diverged at iteration {iteration} (spectral radius estimate {rho:.6})")]
    Divergence { iteration: usize, rho: f64 },

    #[error(
        "non-convergent configuration: rho(omega^2 A) = {rho:.6} >= 1 for lambda = {lambda}, omega = {omega}"
    )]
    NonConvergent { lambda: f64, omega: f64, rho: f64 },

    #[error("linear solve failed: system is singular")]
    Singular,

    #[error("need at least 2 aligned rows to form pairs, got {0}")]
    InsufficientPairs(usize),

    #[error("missing labels: {0}")]
    MissingLabels(String),

    #[error("category `{0}` has no similarity score")]
    UnscoredCategory(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("class id {id} is outside the vocabulary of {classes} classes")]
    Vocabulary { id: u16, classes: usize },

    #[error("ambiguous argmax: classes {0:?} tie")]
    Ambiguous(Vec<usize>),

    #[error("distractor pool has {available} entries but {needed} were requested")]
    InsufficientDistractors { needed: usize, available: usize },

    #[error("nothing to evaluate: no class has a nonzero union in the selected mode")]
    EmptyEvaluation,

    #[error("{path}: {kind}")]
    Format { path: PathBuf, kind: FormatError },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("{actual} bytes on disk but the header implies {expected}")]
    TrailingBytes { expected: u64, actual: u64 },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension {0} exceeds the u32 range of the header")]
    TooLarge(usize),

    #[error("label sidecar: {0}")]
    Sidecar(String),

    #[error("png: {0}")]
    Png(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::NonConvergent { .. }
            | Error::Divergence { .. }
            | Error::InsufficientPairs(_)
            | Error::InsufficientDistractors { .. } => ErrorClass::Validation,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, kind: FormatError) -> Self {
        Error::Format {
            path: path.into(),
            kind,
        }
    }
}
