use thiserror::Error;

pub type Result<T, E = VoiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VoiError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("missing history: {0}")]
    MissingHistory(String),

    #[error("invalid ages: zeta = {zeta} exceeds eta = {eta}")]
    InvalidAges { zeta: usize, eta: usize },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed table cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl VoiError {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        VoiError::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit code for the CLI: 2 for configuration or usage problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            VoiError::Numerical(_) => 3,
            _ => 2,
        }
    }
}
