use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] fixsub_core::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("instance generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for bad configuration or input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use fixsub_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Parse { .. } | HarnessError::Io { .. } => 2,
            HarnessError::Core(E::Config(_) | E::InvalidInput(_) | E::DimensionMismatch { .. } | E::Precondition(_)) => 2,
            _ => 1,
        }
    }
}
