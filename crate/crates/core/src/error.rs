use thiserror::Error;

use crate::oracle::BestResponseReport;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("player count n = {0} is out of range (need n >= 2)")]
    NOutOfRange(i64),

    #[error("mean mu = {0} is out of range (need 0 < mu < 1)")]
    MuOutOfRange(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("distribution mean {actual} does not match required mean {expected}")]
    MeanMismatch { expected: f64, actual: f64 },

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("argument outside domain: {0}")]
    DomainError(String),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("invalid candidate strategy: {0}")]
    InvalidCandidate(String),

    #[error("no profitable deviation found (margin {:e})", .0.margin)]
    NoDeviationFound(Box<BestResponseReport>),
}

pub type Result<T> = std::result::Result<T, GameError>;
