use thiserror::Error;

/// Errors raised by the optimization core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate subgradient (norm {norm:e}) at a point with constraint value {value:e}")]
    DegenerateSubgradient { value: f64, norm: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("iterate became nonfinite at iteration {n}")]
    Divergence { n: usize },

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("topology violation: user {reader} attempted to read from {source_node}")]
    TopologyViolation { reader: String, source_node: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
