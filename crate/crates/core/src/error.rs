use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("epsilon = {0} must be < 1/3 for the beta-1.5 loss")]
    EpsilonTooLarge(f64),
    #[error("x violates the primal constraint at coordinate {0}")]
    InfeasiblePrimal(usize),
    #[error("z[{0}] + epsilon <= 0 is outside the loss domain")]
    DomainViolation(usize),
    #[error("theta[{index}] = {value} is outside the dual domain (bound {bound})")]
    OutsideDualDomain { index: usize, value: f64, bound: f64 },
    #[error("theta[{0}] violates the S0 constraint")]
    CenterOutsideS0(usize),
    #[error("lambda_max = {0} is not positive; the data is degenerate")]
    NonPositiveLambdaMax(f64),
    #[error("design matrix does not have full row rank; no right pseudo-inverse")]
    RankDeficient,
    #[error("strong concavity bound is not positive")]
    NoPositiveBound,
    #[error("weak duality violated: gap = {0}")]
    WeakDualityViolated(f64),
    #[error("solver {solver} does not support the {loss} loss")]
    UnsupportedPairing { solver: &'static str, loss: &'static str },
    #[error("global strong concavity unavailable for this loss ({0})")]
    UnsupportedAlgorithmForLoss(&'static str),
    #[error("line search failed after 30 halvings")]
    LineSearchFailed,
    #[error("no convergence within {iterations} iterations (gap {gap})")]
    NotConverged { iterations: usize, gap: f64 },
    #[error("supremum is unbounded")]
    Unbounded,
}

pub type Result<T> = std::result::Result<T, Error>;
