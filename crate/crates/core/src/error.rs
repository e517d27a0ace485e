use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("{0} requires selfadjoint family")]
    NotSelfadjoint(String),

    #[error("insufficient derivative order for {name}: need {needed}, declared {declared}")]
    InsufficientOrder {
        name: String,
        needed: usize,
        declared: usize,
    },

    #[error("C(0) not invertible on discrete space")]
    SingularLeadingOperator,

    #[error("linear solve failed at step {step}: {reason}")]
    LinearSolve { step: usize, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("coefficient below lower bound {lower_bound} at t={t}, x={x} (value {value})")]
    CoefficientBelowBound {
        lower_bound: f64,
        t: f64,
        x: f64,
        value: f64,
    },

    #[error("unknown case {name:?}; valid cases: {valid}")]
    UnknownCase { name: String, valid: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("problem failed validation: {0}")]
    Validation(String),

    #[error("not positive definite: {0}")]
    NotPositiveDefinite(String),
}

impl Error {
    pub(crate) fn dims(expected: usize, got: usize, context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            expected,
            got,
            context: context.into(),
        }
    }
}
