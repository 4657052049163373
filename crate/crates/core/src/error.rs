use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("exponent p = {0} outside the supported range (1, 64]")]
    InvalidExponent(f64),

    #[error("non-finite entry at coordinate {0}")]
    NonFinite(usize),

    #[error("operation undefined for the zero vector")]
    ZeroVector,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no dictionary element meets the selection threshold (best margin {best_margin:.3e}, eps {eps:.3e})")]
    InfeasibleSelection { best_margin: f64, eps: f64 },

    #[error("basis is numerically dependent (rank {rank} < {len})")]
    DependentBasis { rank: usize, len: usize },

    #[error("invariant violated at step {step}: {what}")]
    Invariant { step: usize, what: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config hash mismatch: trace has {trace}, report has {report}")]
    HashMismatch { trace: String, report: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
