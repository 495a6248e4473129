use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("singular operator: {0}")]
    SingularOperator(String),
    #[error("forward solve diverged at step {step}: norm {norm:e} exceeds limit {limit:e}")]
    Divergence { step: usize, norm: f64, limit: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("undefined subgradient: {0}")]
    UndefinedSubgradient(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
