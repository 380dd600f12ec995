//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

/// Errors produced by the library and surfaced through the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// A switching word referenced a matrix index outside `1..=M`.
    #[error("switching word index {index} out of range for a set of {modes} matrices")]
    InvalidWord { index: usize, modes: usize },

    /// A numeric routine encountered non-finite data or failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Product enumeration would visit more words than the configured cap.
    #[error("enumeration of {words} words exceeds cap {cap}; reduce max_length or raise the cap")]
    EnumerationTooLarge { words: u128, cap: u128 },

    /// An argument violated a mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector/matrix dimensions do not match.
    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    /// An operation that needs sample points received none.
    #[error("sample set is empty")]
    EmptySamples,

    /// Every sample point was degenerate; no polytope can be built.
    #[error("all {0} sample points are degenerate (V below threshold); cannot build polytope")]
    AllSamplesDegenerate(usize),

    /// The gauge LP has no feasible point: the target lies outside the
    /// conic hull of the vertices.
    #[error("gauge LP infeasible: target outside the conic hull of the vertices")]
    Infeasible,

    /// Requested direction is not absorbed by the polytope (degenerate vertex set).
    #[error("unbounded direction: polytope does not absorb the target")]
    UnboundedDirection,

    /// Bad experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Integer result does not fit the requested width.
    #[error("overflow: {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numeric, 4 budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::EnumerationTooLarge { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
