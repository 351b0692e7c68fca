use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("budget of buyer {buyer} is not strictly positive ({value})")]
    NonPositiveBudget { buyer: usize, value: f64 },

    #[error("valuation of buyer {buyer} is negative somewhere on the item space")]
    NegativeValuation { buyer: usize },

    #[error("valuation of buyer {buyer} has zero mean")]
    ZeroMeanValuation { buyer: usize },

    #[error("buyer {buyer} values every item at zero")]
    NoPositiveValue { buyer: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),

    #[error("invalid value: {0}")]
    InvalidInput(&'static str),

    #[error("market must contain at least one item")]
    NoItems,

    #[error("pacing multiplier of buyer {buyer} is not strictly positive ({value})")]
    NonPositiveMultiplier { buyer: usize, value: f64 },

    #[error("spec is not normalized")]
    NotNormalized,

    #[error("operation requires a one-dimensional linear valuation with uniform supply on [0, 1]")]
    NotLinear1D,

    #[error("intercepts must be strictly decreasing in buyer index")]
    InterceptsNotDecreasing,

    #[error("iteration limit reached before certification (residual {residual:e})")]
    NotConverged { residual: f64 },

    #[error("solver backends disagree by {discrepancy:e} (limit {limit:e})")]
    SolverMismatch { discrepancy: f64, limit: f64 },

    #[error("matrix is singular or not positive definite")]
    SingularMatrix,

    #[error("dual objective is not twice differentiable here: {0}")]
    NotTwiceDifferentiable(&'static str),

    #[error("variance estimate {0:e} is negative beyond rounding")]
    NegativeVariance(f64),
}
