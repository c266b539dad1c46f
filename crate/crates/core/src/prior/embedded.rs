use std::f64::consts::PI;
use std::sync::Arc;

use super::{check_query, PriorModel, PriorSpec, SmoothedDerivatives};
use crate::error::{Error, Result};
use crate::linalg::{is_orthonormal_columns, Matrix, Tensor3, Vector};

/// Prior supported on the affine subspace `S = offset + span(basis)` of `R^d`,
/// with a base density on the intrinsic coordinates `t = basisᵀ (x - offset)`.
///
/// For `σ > 0` the smoothed density splits into a Gaussian penalty on the distance
/// to `S` and the intrinsic smoothing of the base:
/// `-ln p_σ(z) = ‖z - z_⊥‖²/(2σ²) - ln p̃_σ(t) + (d - r) ln √(2πσ²)`.
#[derive(Debug, Clone)]
pub struct EmbeddedSubspacePrior {
    base: Arc<dyn PriorModel>,
    basis: Matrix,
    offset: Vector,
}

impl EmbeddedSubspacePrior {
    pub fn new(base: Arc<dyn PriorModel>, basis: Matrix, offset: Vector) -> Result<Self> {
        let r = base.dimension();
        let d = basis.nrows();
        if basis.ncols() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: basis.ncols(),
            });
        }
        if r > d {
            return Err(Error::InvalidPrior(format!("intrinsic dimension {r} exceeds ambient {d}")));
        }
        if offset.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: offset.len(),
            });
        }
        if !is_orthonormal_columns(&basis, 1e-12) {
            return Err(Error::InvalidPrior("basis columns are not orthonormal to 1e-12".into()));
        }
        Ok(Self { base, basis, offset })
    }

    pub fn base(&self) -> &Arc<dyn PriorModel> {
        &self.base
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    pub fn intrinsic_dimension(&self) -> usize {
        self.basis.ncols()
    }

    /// Intrinsic coordinates of the projection of `z` onto `S`.
    pub fn coordinates(&self, z: &Vector) -> Vector {
        self.basis.transpose() * (z - &self.offset)
    }

    /// `z_⊥`, the orthogonal projection of `z` onto `S`.
    pub fn project(&self, z: &Vector) -> Vector {
        &self.offset + &self.basis * self.coordinates(z)
    }

    /// Ambient point with intrinsic coordinates `t`.
    pub fn embed(&self, t: &Vector) -> Vector {
        &self.offset + &self.basis * t
    }

    fn normal_projector(&self) -> Matrix {
        let d = self.basis.nrows();
        Matrix::identity(d, d) - &self.basis * self.basis.transpose()
    }

    fn codim(&self) -> f64 {
        (self.basis.nrows() - self.basis.ncols()) as f64
    }

    fn on_subspace(&self, z: &Vector) -> bool {
        (z - self.project(z)).norm() <= 1e-12 * (1.0 + z.norm())
    }
}

impl PriorModel for EmbeddedSubspacePrior {
    fn dimension(&self) -> usize {
        self.basis.nrows()
    }

    fn effective_dimension(&self) -> usize {
        self.base.effective_dimension()
    }

    fn third_derivative_bound(&self) -> f64 {
        self.base.third_derivative_bound()
    }

    fn certify_third_derivative_bound(&self) -> Result<f64> {
        self.base.certify_third_derivative_bound()
    }

    fn log_density_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<f64> {
        check_query(self.dimension(), sigma_sq, z)?;
        let t = self.coordinates(z);
        if sigma_sq == 0.0 {
            // Density with respect to the intrinsic Lebesgue measure; zero off S.
            if !self.on_subspace(z) {
                return Err(Error::NonFinite("log-density off the support subspace"));
            }
            return self.base.log_density_smoothed(0.0, &t);
        }
        let normal = (z - self.embed(&t)).norm_squared();
        let intrinsic = self.base.log_density_smoothed(sigma_sq, &t)?;
        Ok(intrinsic - normal / (2.0 * sigma_sq) - 0.5 * self.codim() * (2.0 * PI * sigma_sq).ln())
    }

    fn score_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Vector> {
        check_query(self.dimension(), sigma_sq, z)?;
        if sigma_sq == 0.0 {
            return Err(Error::NonFinite("ambient score of a subspace prior at sigma = 0"));
        }
        let t = self.coordinates(z);
        let normal = z - self.embed(&t);
        Ok(&self.basis * self.base.score_smoothed(sigma_sq, &t)? - normal / sigma_sq)
    }

    fn hessian_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Matrix> {
        check_query(self.dimension(), sigma_sq, z)?;
        if sigma_sq == 0.0 {
            return Err(Error::NonFinite("ambient hessian of a subspace prior at sigma = 0"));
        }
        let t = self.coordinates(z);
        let h = self.base.hessian_smoothed(sigma_sq, &t)?;
        Ok(&self.basis * h * self.basis.transpose() - self.normal_projector() / sigma_sq)
    }

    fn third_deriv_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Tensor3> {
        check_query(self.dimension(), sigma_sq, z)?;
        let t = self.coordinates(z);
        Ok(self.base.third_deriv_smoothed(sigma_sq, &t)?.lift(&self.basis))
    }

    fn posterior_variance(&self, sigma_sq: f64, z: &Vector) -> Result<Matrix> {
        check_query(self.dimension(), sigma_sq, z)?;
        if sigma_sq == 0.0 {
            return Err(Error::SigmaZero);
        }
        // X lives on S, so its conditional covariance is the intrinsic one pushed forward.
        let t = self.coordinates(z);
        let v = self.base.posterior_variance(sigma_sq, &t)?;
        Ok(&self.basis * v * self.basis.transpose())
    }

    fn smoothed_derivatives(&self, sigma_sq: f64, z: &Vector) -> Result<SmoothedDerivatives> {
        check_query(self.dimension(), sigma_sq, z)?;
        if sigma_sq == 0.0 {
            return Err(Error::NonFinite("ambient derivatives of a subspace prior at sigma = 0"));
        }
        let t = self.coordinates(z);
        let base = self.base.smoothed_derivatives(sigma_sq, &t)?;
        let normal = z - self.embed(&t);
        Ok(SmoothedDerivatives {
            log_density: base.log_density
                - normal.norm_squared() / (2.0 * sigma_sq)
                - 0.5 * self.codim() * (2.0 * PI * sigma_sq).ln(),
            score: &self.basis * base.score - &normal / sigma_sq,
            hessian: &self.basis * base.hessian * self.basis.transpose() - self.normal_projector() / sigma_sq,
            third: base.third.lift(&self.basis),
        })
    }

    fn log_density_variance_derivative(&self, sigma_sq: f64, z: &Vector) -> Option<Result<f64>> {
        if let Err(e) = check_query(self.dimension(), sigma_sq, z) {
            return Some(Err(e));
        }
        let t = self.coordinates(z);
        let base = self.base.log_density_variance_derivative(sigma_sq, &t)?;
        let normal = (z - self.embed(&t)).norm_squared();
        Some(base.map(|b| b + normal / (2.0 * sigma_sq * sigma_sq) - 0.5 * self.codim() / sigma_sq))
    }

    fn supremum_grid(&self, sigma_sq: f64) -> Vec<Vector> {
        // The third derivative only depends on the intrinsic coordinates.
        self.base
            .supremum_grid(sigma_sq)
            .iter()
            .map(|t| self.embed(t))
            .collect()
    }

    fn spec(&self) -> PriorSpec {
        PriorSpec::Embedded {
            base: Box::new(self.base.spec()),
            basis: self.basis.column_iter().map(|c| c.iter().copied().collect()).collect(),
            offset: self.offset.iter().copied().collect(),
        }
    }

    fn as_embedded(&self) -> Option<&EmbeddedSubspacePrior> {
        Some(self)
    }
}
