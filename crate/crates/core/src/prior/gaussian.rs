use std::f64::consts::PI;

use super::{check_query, PriorModel, PriorSpec, SmoothedDerivatives};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{is_orthonormal_columns, Matrix, Tensor3, Vector};

/// `N(mean, Σ)` with `Σ = Q diag(λ) Qᵀ`. Smoothing keeps it Gaussian:
/// `p_σ = N(mean, Σ + σ² I)`.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    mean: Vector,
    eigenvalues: Vector,
    eigenvectors: Matrix,
}

impl GaussianPrior {
    pub fn new(mean: Vector, eigenvalues: Vector, eigenvectors: Matrix) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidPrior("dimension must be at least 1".into()));
        }
        if eigenvalues.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: eigenvalues.len(),
            });
        }
        if eigenvectors.nrows() != d || eigenvectors.ncols() != d {
            return Err(Error::InvalidPrior(format!(
                "eigenvector matrix must be {d}x{d}, got {}x{}",
                eigenvectors.nrows(),
                eigenvectors.ncols()
            )));
        }
        if let Some(bad) = eigenvalues.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidPrior(format!(
                "covariance eigenvalues must be positive and finite, got {bad}"
            )));
        }
        if mean.iter().chain(eigenvectors.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian prior parameters"));
        }
        if !is_orthonormal_columns(&eigenvectors, 1e-12) {
            return Err(Error::InvalidPrior(
                "eigenvectors are not orthonormal to 1e-12".into(),
            ));
        }
        Ok(Self {
            mean,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Axis-aligned covariance `diag(variances)`.
    pub fn diagonal(mean: Vector, variances: &[f64]) -> Result<Self> {
        let d = variances.len();
        Self::new(mean, Vector::from_column_slice(variances), Matrix::identity(d, d))
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::diagonal(Vector::zeros(dim), &vec![1.0; dim])
    }

    /// From a dense symmetric positive-definite covariance.
    pub fn from_covariance(mean: Vector, covariance: &Matrix) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: covariance.nrows(),
            });
        }
        let asym = (covariance - covariance.transpose()).abs().max();
        if asym > 1e-12 * covariance.abs().max().max(1.0) {
            return Err(Error::InvalidPrior("covariance is not symmetric".into()));
        }
        let eig = covariance.clone().symmetric_eigen();
        Self::new(mean, eig.eigenvalues, eig.eigenvectors)
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn covariance(&self) -> Matrix {
        self.spectral(|l| l)
    }

    /// `H = Σ⁻¹`.
    pub fn precision(&self) -> Matrix {
        self.spectral(|l| 1.0 / l)
    }

    /// `(Σ + σ² I)⁻¹`.
    pub fn smoothed_precision(&self, sigma_sq: f64) -> Matrix {
        self.spectral(|l| 1.0 / (l + sigma_sq))
    }

    /// `Q diag(f(λ_i)) Qᵀ`.
    fn spectral(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let q = &self.eigenvectors;
        let scaled = Matrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * f(self.eigenvalues[j]));
        scaled * q.transpose()
    }

    /// Coordinates of `z - mean` in the eigenbasis.
    fn coords(&self, z: &Vector) -> Vector {
        self.eigenvectors.transpose() * (z - &self.mean)
    }
}

impl PriorModel for GaussianPrior {
    fn dimension(&self) -> usize {
        self.mean.len()
    }

    fn third_derivative_bound(&self) -> f64 {
        0.0
    }

    fn certify_third_derivative_bound(&self) -> Result<f64> {
        Ok(0.0)
    }

    fn log_density_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<f64> {
        check_query(self.dimension(), sigma_sq, z)?;
        let c = self.coords(z);
        let value = c
            .iter()
            .zip(self.eigenvalues.iter())
            .map(|(ci, l)| {
                let v = l + sigma_sq;
                -0.5 * ci * ci / v - 0.5 * (2.0 * PI * v).ln()
            })
            .sum();
        ensure_finite(value, "gaussian log-density")
    }

    fn score_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Vector> {
        check_query(self.dimension(), sigma_sq, z)?;
        let c = self.coords(z);
        let scaled = Vector::from_fn(c.len(), |i, _| -c[i] / (self.eigenvalues[i] + sigma_sq));
        Ok(&self.eigenvectors * scaled)
    }

    fn hessian_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Matrix> {
        check_query(self.dimension(), sigma_sq, z)?;
        Ok(-self.smoothed_precision(sigma_sq))
    }

    fn third_deriv_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Tensor3> {
        check_query(self.dimension(), sigma_sq, z)?;
        Ok(Tensor3::zeros(self.dimension()))
    }

    fn posterior_variance(&self, sigma_sq: f64, z: &Vector) -> Result<Matrix> {
        check_query(self.dimension(), sigma_sq, z)?;
        if sigma_sq == 0.0 {
            return Err(Error::SigmaZero);
        }
        // Var(X | z) = Σ - Σ(Σ + σ²I)⁻¹Σ = Q diag(λσ²/(λ+σ²)) Qᵀ
        Ok(self.spectral(|l| l * sigma_sq / (l + sigma_sq)))
    }

    fn smoothed_derivatives(&self, sigma_sq: f64, z: &Vector) -> Result<SmoothedDerivatives> {
        Ok(SmoothedDerivatives {
            log_density: self.log_density_smoothed(sigma_sq, z)?,
            score: self.score_smoothed(sigma_sq, z)?,
            hessian: -self.smoothed_precision(sigma_sq),
            third: Tensor3::zeros(self.dimension()),
        })
    }

    fn log_density_variance_derivative(&self, sigma_sq: f64, z: &Vector) -> Option<Result<f64>> {
        Some(check_query(self.dimension(), sigma_sq, z).map(|_| {
            let c = self.coords(z);
            c.iter()
                .zip(self.eigenvalues.iter())
                .map(|(ci, l)| {
                    let v = l + sigma_sq;
                    0.5 * ci * ci / (v * v) - 0.5 / v
                })
                .sum()
        }))
    }

    fn supremum_grid(&self, _sigma_sq: f64) -> Vec<Vector> {
        // Derivatives of a log-quadratic are position independent beyond order one.
        vec![self.mean.clone()]
    }

    fn spec(&self) -> PriorSpec {
        PriorSpec::Gaussian {
            mean: self.mean.iter().copied().collect(),
            eigenvalues: Some(self.eigenvalues.iter().copied().collect()),
            eigenvectors: Some(
                self.eigenvectors
                    .column_iter()
                    .map(|c| c.iter().copied().collect())
                    .collect(),
            ),
            diagonal: None,
        }
    }

    fn as_gaussian(&self) -> Option<&GaussianPrior> {
        Some(self)
    }
}
