use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("attribute file references unknown node `{0}`")]
    UnknownNode(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("chain is not reversible (detailed balance off by {violation:e})")]
    NonReversible { violation: f64 },

    #[error("chain is reducible: {0}")]
    Reducible(String),

    #[error("infeasible model: {0}")]
    Infeasible(String),

    #[error("sampling exhausted: {0}")]
    Exhausted(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonReversible { .. } | Error::Reducible(_) | Error::Numerical(_)
        )
    }
}
