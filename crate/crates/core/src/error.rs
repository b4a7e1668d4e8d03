use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("division by zero")]
    DivisionByZero,

    /// A value could not be determined from the tracked coefficients. The
    /// caller has to raise the working precision.
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("function has top shell {top}, which exceeds level {level}")]
    TopExceedsLevel { top: u32, level: u32 },

    #[error("basis construction failed: {0}")]
    ConstructionFailed(String),

    #[error("no instance passed all checks within {0} attempts")]
    BudgetExhausted(usize),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error payloads.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DivisionByZero => "division_by_zero",
            Error::InsufficientPrecision(_) => "insufficient_precision",
            Error::CheckFailed(_) => "check_failed",
            Error::TopExceedsLevel { .. } => "top_exceeds_level",
            Error::ConstructionFailed(_) => "construction_failed",
            Error::BudgetExhausted(_) => "budget_exhausted",
            Error::Parse(_) => "parse_error",
        }
    }

    pub(crate) fn precision(what: impl Into<String>) -> Self {
        Error::InsufficientPrecision(what.into())
    }
}
