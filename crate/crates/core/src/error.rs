use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes: everything
/// except `Numeric` is a data/usage problem, `Numeric` is a numerical failure.
#[derive(Debug, Error)]
pub enum Error {
    /// Input that cannot support the requested fit or statistic
    /// (too few samples, a missing class, all-identical points, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A vector or matrix with the wrong number of features.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Tensor shapes that do not line up for the requested operation.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A crop or index that leaves the valid image area.
    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    /// Non-finite values or a computation that lost its numerical footing.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Malformed file contents (manifest, config, model container, ...).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
