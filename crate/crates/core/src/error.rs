use thiserror::Error;

/// Errors raised anywhere in the inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid autoregressive order p={p} for a sample of size n={n} (need n >= p + 2)")]
    InvalidOrder { p: usize, n: usize },

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("eigenvalues are not closed under conjugation (imaginary residue {residue:e})")]
    NonRealCoefficients { residue: f64 },

    #[error("secondary eigenvalue numerically equal to 1, the pi coefficient is singular")]
    SingularPi,

    #[error("gram matrix is numerically singular")]
    SingularGram,

    #[error("stable block has spectral radius {radius} >= 1")]
    UnstableBlock { radius: f64 },

    #[error("could not draw distinct secondary eigenvalues after {attempts} attempts")]
    RejectionExhausted { attempts: usize },

    #[error("level {0} must lie in (0, 1)")]
    InvalidLevel(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("series too short: length {len}, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("{errors} of {replications} replications failed, above the abort threshold")]
    ReplicationAbort { errors: usize, replications: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end:
    /// 2 input error, 3 numerical failure, 4 replication-abort threshold.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. }
            | Error::NonRealCoefficients { .. }
            | Error::SingularPi
            | Error::SingularGram
            | Error::UnstableBlock { .. }
            | Error::RejectionExhausted { .. } => 3,
            Error::ReplicationAbort { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
