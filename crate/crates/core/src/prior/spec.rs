use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EmbeddedSubspacePrior, GaussianPrior, Potential, PriorModel, QuadraturePrior1D};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Serializable description from which a prior can be rebuilt.
///
/// Matrices are given as lists of columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorSpec {
    Gaussian {
        mean: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eigenvalues: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eigenvectors: Option<Vec<Vec<f64>>>,
        /// Shorthand for an axis-aligned covariance.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagonal: Option<Vec<f64>>,
    },
    Quadrature1d {
        potential: Potential,
        lo: f64,
        hi: f64,
        points: usize,
    },
    Embedded {
        base: Box<PriorSpec>,
        basis: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
}

impl PriorSpec {
    pub fn diagonal_gaussian(mean: Vec<f64>, variances: Vec<f64>) -> Self {
        PriorSpec::Gaussian {
            mean,
            eigenvalues: None,
            eigenvectors: None,
            diagonal: Some(variances),
        }
    }

    pub fn quadrature(potential: Potential) -> Self {
        let (lo, hi) = potential.default_bounds();
        PriorSpec::Quadrature1d {
            potential,
            lo,
            hi,
            points: ((hi - lo) * 100.0).round() as usize + 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PriorSpec::Gaussian { .. } => "gaussian",
            PriorSpec::Quadrature1d { .. } => "quadrature1d",
            PriorSpec::Embedded { .. } => "embedded",
        }
    }

    pub fn build(&self) -> Result<Arc<dyn PriorModel>> {
        Ok(match self {
            PriorSpec::Gaussian {
                mean,
                eigenvalues,
                eigenvectors,
                diagonal,
            } => {
                let mean = Vector::from_column_slice(mean);
                let prior = match (eigenvalues, eigenvectors, diagonal) {
                    (None, None, Some(diag)) => GaussianPrior::diagonal(mean, diag)?,
                    (Some(values), Some(vectors), None) => {
                        GaussianPrior::new(mean, Vector::from_column_slice(values), columns_to_matrix(vectors)?)?
                    }
                    (Some(values), None, None) => GaussianPrior::diagonal(mean, values)?,
                    _ => {
                        return Err(Error::InvalidPrior(
                            "gaussian prior takes either `diagonal` or `eigenvalues` (+ `eigenvectors`)".into(),
                        ))
                    }
                };
                Arc::new(prior)
            }
            PriorSpec::Quadrature1d {
                potential,
                lo,
                hi,
                points,
            } => Arc::new(QuadraturePrior1D::new(*potential, *lo, *hi, *points)?),
            PriorSpec::Embedded { base, basis, offset } => Arc::new(EmbeddedSubspacePrior::new(
                base.build()?,
                columns_to_matrix(basis)?,
                Vector::from_column_slice(offset),
            )?),
        })
    }
}

fn columns_to_matrix(columns: &[Vec<f64>]) -> Result<Matrix> {
    let ncols = columns.len();
    if ncols == 0 {
        return Err(Error::InvalidPrior("matrix needs at least one column".into()));
    }
    let nrows = columns[0].len();
    if let Some(bad) = columns.iter().find(|c| c.len() != nrows) {
        return Err(Error::DimensionMismatch {
            expected: nrows,
            got: bad.len(),
        });
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| columns[j][i]))
}
