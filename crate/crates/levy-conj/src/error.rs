use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LevyError {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),

    #[error("representation unavailable: {0} diverges")]
    ReprUnavailable(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("numeric failure: {msg} (error estimate {err:e})")]
    Numeric { msg: String, err: f64 },

    #[error("gaussian part is nonzero; split_gaussian first")]
    NotId0,

    #[error("not definable: {0}")]
    NotDefinable(String),

    #[error("step {step} leaves the domain: {reason}")]
    IterationDomain { step: usize, reason: String },

    #[error("not decomposable: cofactor negative at r = {radius:e} on ray {ray}")]
    NotDecomposable { ray: usize, radius: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LevyError>;

impl LevyError {
    pub(crate) fn numeric(msg: impl Into<String>, err: f64) -> Self {
        LevyError::Numeric {
            msg: msg.into(),
            err,
        }
    }
}
