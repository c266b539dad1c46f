use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{power_iteration_gram, Matrix, Vector};

/// Convex, lower-bounded, `L_f`-smooth data term `f`.
pub trait DataFidelity: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Lipschitz constant `L_f` of `∇f`.
    fn smoothness(&self) -> f64;
    fn describe(&self) -> serde_json::Value;

    fn as_linear(&self) -> Option<&LinearGaussianFidelity> {
        None
    }
}

/// `f(x) = ½‖A x - b‖²` with `L_f = λ_max(AᵀA)`.
#[derive(Debug, Clone)]
pub struct LinearGaussianFidelity {
    a: Matrix,
    b: Vector,
    smoothness: f64,
}

impl LinearGaussianFidelity {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("fidelity operator or observation"));
        }
        let smoothness = power_iteration_gram(&a, 1e-10, 100_000);
        if !(smoothness > 0.0) {
            return Err(Error::InvalidProblem("fidelity operator is zero".into()));
        }
        Ok(Self { a, b, smoothness })
    }

    /// Denoising fidelity `½‖x - b‖²`.
    pub fn denoising(b: Vector) -> Result<Self> {
        let d = b.len();
        Self::new(Matrix::identity(d, d), b)
    }

    pub fn operator(&self) -> &Matrix {
        &self.a
    }

    pub fn observation(&self) -> &Vector {
        &self.b
    }
}

impl DataFidelity for LinearGaussianFidelity {
    fn dimension(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * (&self.a * x - &self.b).norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.a.transpose() * (&self.a * x - &self.b)
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "linear_gaussian",
            "operator_rows": self.a.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "observation": self.b.as_slice(),
            "smoothness": self.smoothness,
        })
    }

    fn as_linear(&self) -> Option<&LinearGaussianFidelity> {
        Some(self)
    }
}
