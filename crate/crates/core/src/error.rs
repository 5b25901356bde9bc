use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MrdError>;

#[derive(Debug, Error)]
pub enum MrdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix factorization failed after jitter reached {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("{0}")]
    Degenerate(String),

    #[error("training failed at iteration {iteration}: {reason}")]
    Training {
        iteration: usize,
        reason: String,
        trace: Vec<(usize, f64)>,
    },

    #[error("unknown view `{0}`")]
    UnknownView(String),

    #[error("views are not row-aligned: {0}")]
    Alignment(String),

    #[error("no training latent within delta {delta_used:e} after {doublings} doublings")]
    EmptyNeighborhood { delta_used: f64, doublings: usize },

    #[error("transfer impossible: the model has no shared latent dimensions")]
    NoSharedDimensions,

    #[error("{}: file is empty", path.display())]
    EmptyFile { path: PathBuf },

    #[error("{}: line {line} has {found} cells, expected {expected}", path.display())]
    RaggedRow {
        path: PathBuf,
        line: usize,
        found: usize,
        expected: usize,
    },

    #[error("{}: line {line}, column {column}: `{cell}` is not a number", path.display())]
    NonNumeric {
        path: PathBuf,
        line: usize,
        column: usize,
        cell: String,
    },

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("model file parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MrdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MrdError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MrdError::Io {
            path: path.into(),
            source,
        }
    }

    /// Usage errors map to exit code 2 in the CLI, everything else to 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            MrdError::InvalidArgument(_)
                | MrdError::DimensionMismatch(_)
                | MrdError::UnknownView(_)
                | MrdError::Alignment(_)
        )
    }
}
