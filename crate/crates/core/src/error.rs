use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("query at z = {z} lies beyond the quadrature grid [{lo}, {hi}] plus 6 sigma ({sigma})")]
    TailEscape { z: f64, lo: f64, hi: f64, sigma: f64 },

    #[error("posterior variance requires sigma > 0")]
    SigmaZero,

    #[error("third-derivative supremum changed by {relative_change:.3e} under grid refinement (> 1%)")]
    GridTooCoarse { relative_change: f64 },

    #[error("prior is not log-concave: {0}")]
    NotLogConcave(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("iterate diverged at step {step} (norm {norm:.3e})")]
    Divergence { step: usize, norm: f64 },

    #[error("Newton solver hit the {0}-iteration cap")]
    MaxIterations(usize),

    #[error("line search failed at gradient norm {0:.3e}")]
    LineSearchFailed(f64),

    #[error("schedule has no entry for step {0}")]
    ScheduleExhausted(usize),

    #[error("exact proximal gradient descent did not reach its fixed point in {0} steps")]
    FixedPointNotFound(usize),

    #[error("bound `{check}` violated at index {index}: value {value:.6e} > bound {bound:.6e}")]
    BoundViolated {
        check: String,
        index: usize,
        value: f64,
        bound: f64,
    },

    #[error("ODE state left the critical manifold at sigma^2 = {sigma_sq:.3e} (Newton correction {correction:.3e})")]
    ManifoldEscape { sigma_sq: f64, correction: f64 },

    #[error("only {0} usable points for the rate fit (need 10)")]
    InsufficientData(usize),
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
