use thiserror::Error;

/// Errors produced by the lottery mechanisms, analysis routines and loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("score {value} for candidate {candidate}, review {review} is outside [{min}, {max}]")]
    ScoreOutOfRange {
        candidate: usize,
        review: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid review scale: {0}")]
    InvalidScale(String),

    #[error("review matrix has no candidates")]
    NoCandidates,

    #[error("candidate {0} has no reviews")]
    EmptyRow(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("candidate {candidate} has {count} review(s); leave-one-out intervals need at least 2")]
    TooFewReviews { candidate: usize, count: usize },

    #[error("budget {k} is outside [0, {n}]")]
    BudgetOutOfRange { k: usize, n: usize },

    #[error("probabilities sum to {sum}, expected budget {k}")]
    BudgetViolation { sum: f64, k: usize },

    #[error("probability {value} at index {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },

    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("infeasible tiers: {accept} accepted and {pool} in the pool cannot realise budget {k}")]
    InfeasibleTiers { accept: usize, pool: usize, k: usize },

    #[error("exact enumeration supports at most {max} candidates, got {n}")]
    TooLarge { n: usize, max: usize },

    #[error("no ex post valid subset of size {k} exists")]
    NoValidSubset { k: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Rejects non-finite or non-positive parameters.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::NonPositive { name, value })
    }
}
