use thiserror::Error;

/// Errors produced by the library.
///
/// The variants map onto the CLI exit codes: `Domain`, `Spec` and
/// `Admissibility` are input problems (exit 2), `Numerical` and `Embedding`
/// are numerical failures (exit 4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("circulant embedding is not nonnegative definite: minimum eigenvalue {min_eigenvalue:.3e} (max {max_eigenvalue:.3e})")]
    Embedding {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("scale {scale} unavailable: n_j = {count} for N = {n}")]
    ScaleUnavailable { scale: usize, n: usize, count: i64 },

    #[error("admissibility violated: {0}")]
    Admissibility(String),

    #[error("invalid spec at {pointer}: {message}")]
    Spec { pointer: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit status: 2 for invalid input, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Embedding { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn spec(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
