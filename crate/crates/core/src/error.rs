use thiserror::Error;

/// Errors raised by the models, filters and evidence computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DadaError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },

    #[error("ill-conditioned {what} (condition number {condition:.3e})")]
    IllConditioned { what: String, condition: f64 },

    #[error("PN undefined: factual probability p1 is zero")]
    UndefinedPn,

    #[error("PS undefined: counterfactual probability p0 is one")]
    UndefinedPs,

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, DadaError>;
