//! Numerical checks of the smoothing identities, the solution path `σ² ↦ x*_σ` and
//! empirical convergence rates.

mod path;
mod rate;

use serde::Serialize;

pub use path::{
    path_bounds_report, path_csv, solve_solution_path, verify_path_bounds, PathState, NEWTON_PROJECTION_TOL,
    RK4_SUBSTEPS,
};
pub use rate::{fit_rate, rate_slope, ErrorRow, RateReport};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::prior::PriorModel;

/// Step in `σ²` of the central differences used by the PDE checks.
pub const SIGMA_SQ_FD_STEP: f64 = 1e-3;
/// Relative slack of the maximum-principle check.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-3;

/// Margins of one family of inequalities `value ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub parameters: serde_json::Value,
    /// `bound - value` per evaluation point.
    pub margins: Vec<f64>,
    pub passed: bool,
}

impl CheckReport {
    pub fn new(name: &str, parameters: serde_json::Value, margins: Vec<f64>) -> Self {
        let passed = margins.iter().all(|m| *m >= 0.0);
        Self {
            name: name.to_string(),
            parameters,
            margins,
            passed,
        }
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The first violated inequality as an error.
    pub fn violation(&self) -> Option<Error> {
        self.margins
            .iter()
            .enumerate()
            .find(|(_, m)| !(**m >= 0.0))
            .map(|(index, m)| Error::BoundViolated {
                check: self.name.clone(),
                index,
                value: -m,
                bound: 0.0,
            })
    }

    pub fn into_result(self) -> Result<Self> {
        match self.violation() {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// `∂_{σ²} ∇ln p_σ(z) = ½ [∇Δ ln p_σ(z) + 2 ∇² ln p_σ(z) ∇ln p_σ(z)]`.
pub fn score_sigma_derivative(prior: &dyn PriorModel, sigma_sq: f64, z: &Vector) -> Result<Vector> {
    if sigma_sq == 0.0 {
        return Err(Error::SigmaZero);
    }
    let d = prior.smoothed_derivatives(sigma_sq, z)?;
    Ok((d.third.laplacian_gradient() + &d.hessian * &d.score * 2.0) * 0.5)
}

/// `∂ ln p_σ / ∂σ²`: closed form when the prior has one, otherwise a central
/// difference with step [`SIGMA_SQ_FD_STEP`].
pub fn log_density_sigma_derivative(prior: &dyn PriorModel, sigma_sq: f64, z: &Vector) -> Result<f64> {
    if let Some(exact) = prior.log_density_variance_derivative(sigma_sq, z) {
        return exact;
    }
    let h = SIGMA_SQ_FD_STEP;
    let up = prior.log_density_smoothed(sigma_sq + h, z)?;
    let down = prior.log_density_smoothed(sigma_sq - h, z)?;
    Ok((up - down) / (2.0 * h))
}

/// `max_z |∂_{σ²} ln p_σ(z) - ½(Δ ln p_σ(z) + ‖∇ln p_σ(z)‖²)|` over `z_grid`.
pub fn heat_equation_residual(prior: &dyn PriorModel, sigma_sq: f64, z_grid: &[Vector]) -> Result<f64> {
    if !(sigma_sq >= 2.0 * SIGMA_SQ_FD_STEP) {
        return Err(Error::InvalidProblem(format!(
            "heat-equation check needs sigma^2 >= {}, got {sigma_sq}",
            2.0 * SIGMA_SQ_FD_STEP
        )));
    }
    let mut worst: f64 = 0.0;
    for z in z_grid {
        let lhs = log_density_sigma_derivative(prior, sigma_sq, z)?;
        let d = prior.smoothed_derivatives(sigma_sq, z)?;
        let rhs = 0.5 * (d.hessian.trace() + d.score.norm_squared());
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// `max_z ‖∂_{σ²}∇ln p_σ(z) - score_sigma_derivative(z)‖` with a central difference
/// of the score in `σ²`.
pub fn score_pde_residual(prior: &dyn PriorModel, sigma_sq: f64, z_grid: &[Vector], step: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for z in z_grid {
        let fd = (prior.score_smoothed(sigma_sq + step, z)? - prior.score_smoothed(sigma_sq - step, z)?) / (2.0 * step);
        worst = worst.max((fd - score_sigma_derivative(prior, sigma_sq, z)?).norm());
    }
    Ok(worst)
}

/// Supremum of `‖∇Δ ln p_σ‖` over the prior's evaluation grid, per `σ²`, against
/// `√r M (1 + 1e-3)`.
pub fn max_principle_report(prior: &dyn PriorModel, sigma_sq_list: &[f64]) -> Result<(CheckReport, Vec<f64>)> {
    let r = prior.effective_dimension() as f64;
    let bound = r.sqrt() * prior.third_derivative_bound() * (1.0 + MAX_PRINCIPLE_SLACK);
    let mut suprema = Vec::with_capacity(sigma_sq_list.len());
    for &s2 in sigma_sq_list {
        let mut sup: f64 = 0.0;
        for z in prior.supremum_grid(s2) {
            sup = sup.max(prior.third_deriv_smoothed(s2, &z)?.laplacian_gradient().norm());
        }
        suprema.push(sup);
    }
    let report = CheckReport::new(
        "max_principle",
        serde_json::json!({
            "sigma_sq": sigma_sq_list,
            "bound": bound,
            "suprema": suprema,
        }),
        suprema.iter().map(|s| bound - s).collect(),
    );
    Ok((report, suprema))
}

/// As [`max_principle_report`], failing with [`Error::BoundViolated`] on a violation.
pub fn max_principle_check(prior: &dyn PriorModel, sigma_sq_list: &[f64]) -> Result<CheckReport> {
    max_principle_report(prior, sigma_sq_list)?.0.into_result()
}

#[cfg(test)]
mod tests;
