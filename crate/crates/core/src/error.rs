use alloc::string::String;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("population size {0} outside the supported range 1..=256")]
    PopulationSize(usize),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("step rejected: covariance loses positive definiteness (smallest eigenvalue {min_eigenvalue})")]
    StepRejected { min_eigenvalue: f64 },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("weight scheme violates the hypothesis w_i >= w_j for all i < j and w_1 > w_lambda")]
    NotMonotone,

    #[error("threshold {threshold} is not above the admissible lower bound {bound}")]
    ThresholdBelowAdmissible { threshold: f64, bound: f64 },

    #[error("learning rate {alpha} is not below 2*beta*(1-gamma) = {limit}")]
    LearningRateTooLarge { alpha: f64, limit: f64 },

    #[error("surrogate evaluation failed: {0}")]
    SurrogateEvaluation(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}
