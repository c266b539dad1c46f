//! Prior densities and their Gaussian-smoothed family.
//!
//! Every query takes the noise *variance* `sigma_sq = σ² ≥ 0`; `σ² = 0` means the
//! unsmoothed prior. The smoothed density is `p_σ = p * N(0, σ² I)`, i.e. the law of
//! `X + σ ε` with `X ~ p` and `ε` standard normal.

mod embedded;
mod gaussian;
mod potential;
mod quadrature;
mod spec;

use std::fmt;

pub use embedded::EmbeddedSubspacePrior;
pub use gaussian::GaussianPrior;
pub use potential::Potential;
pub use quadrature::{QuadratureOptions, QuadraturePrior1D};
pub use spec::PriorSpec;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tensor3, Vector};

/// Safety factor applied to numerically certified third-derivative bounds.
pub const CERTIFICATION_SAFETY_FACTOR: f64 = 1.01;

/// Value, score, Hessian and third derivative of `ln p_σ` at one point.
#[derive(Debug, Clone)]
pub struct SmoothedDerivatives {
    pub log_density: f64,
    pub score: Vector,
    pub hessian: Matrix,
    pub third: Tensor3,
}

/// Capability interface for a prior `p` on `R^d` with access to its smoothed family.
///
/// Implementations are immutable after construction, so every query is pure and
/// the objects can be shared across threads.
pub trait PriorModel: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize;

    /// Dimension that enters the third-derivative constants (`r` for a prior
    /// supported on an `r`-dimensional affine subspace, otherwise `d`).
    fn effective_dimension(&self) -> usize {
        self.dimension()
    }

    /// Stored bound `M ≥ sup_x ‖∇³ ln p(x)‖_F`.
    fn third_derivative_bound(&self) -> f64;

    /// Recomputes `M`: exact where known analytically, otherwise a certified grid
    /// supremum inflated by [`CERTIFICATION_SAFETY_FACTOR`].
    fn certify_third_derivative_bound(&self) -> Result<f64>;

    fn log_density_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<f64>;

    fn score_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Vector>;

    fn hessian_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Matrix>;

    fn third_deriv_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Tensor3>;

    /// Conditional covariance of the noise displacement `σε` (equivalently of `X`)
    /// given `X + σε = z`. Satisfies `-∇² ln p_σ(z) = (I - V/σ²)/σ²`.
    fn posterior_variance(&self, sigma_sq: f64, z: &Vector) -> Result<Matrix>;

    /// MMSE denoiser `E[X | X + σε = z]` through Tweedie's formula.
    fn mmse(&self, sigma_sq: f64, z: &Vector) -> Result<Vector> {
        check_query(self.dimension(), sigma_sq, z)?;
        if sigma_sq == 0.0 {
            return Ok(z.clone());
        }
        let score = self.score_smoothed(sigma_sq, z)?;
        Ok(z + score * sigma_sq)
    }

    /// All derivatives at once; quadrature priors share one pass over the nodes.
    fn smoothed_derivatives(&self, sigma_sq: f64, z: &Vector) -> Result<SmoothedDerivatives> {
        Ok(SmoothedDerivatives {
            log_density: self.log_density_smoothed(sigma_sq, z)?,
            score: self.score_smoothed(sigma_sq, z)?,
            hessian: self.hessian_smoothed(sigma_sq, z)?,
            third: self.third_deriv_smoothed(sigma_sq, z)?,
        })
    }

    /// Closed-form `∂ ln p_σ(z) / ∂σ²` when available.
    fn log_density_variance_derivative(&self, _sigma_sq: f64, _z: &Vector) -> Option<Result<f64>> {
        None
    }

    /// Whether the prior passed a log-concavity check at construction.
    fn is_log_concave(&self) -> bool {
        true
    }

    /// Points over which suprema "over R^d" are taken at noise level `sigma_sq`.
    fn supremum_grid(&self, sigma_sq: f64) -> Vec<Vector>;

    /// Reconstructible description of this prior.
    fn spec(&self) -> PriorSpec;

    fn as_gaussian(&self) -> Option<&GaussianPrior> {
        None
    }

    fn as_embedded(&self) -> Option<&EmbeddedSubspacePrior> {
        None
    }
}

/// Free-function form of [`PriorModel::certify_third_derivative_bound`].
pub fn certify_third_derivative_bound(prior: &dyn PriorModel) -> Result<f64> {
    prior.certify_third_derivative_bound()
}

pub(crate) fn check_query(dim: usize, sigma_sq: f64, z: &Vector) -> Result<()> {
    if z.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: z.len(),
        });
    }
    if !sigma_sq.is_finite() {
        return Err(Error::NonFinite("sigma_sq"));
    }
    if sigma_sq < 0.0 {
        return Err(Error::InvalidProblem(format!(
            "noise variance must be nonnegative, got {sigma_sq}"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query point"));
    }
    Ok(())
}
