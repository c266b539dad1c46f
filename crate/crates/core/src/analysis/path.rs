//! The solution path `σ² ↦ x*_σ = argmin F_σ`.
//!
//! Differentiating `∇F_σ(x*_σ) = 0` in `σ²` gives
//! `ẋ*_σ = -[∇²F_σ]⁻¹ ∂_{σ²}∇F_σ = τ [I - τH]⁻¹ ∂_{σ²} s`, with `s` and `H` the smoothed
//! score and Hessian. On the path `s = (x - y)/τ`, which yields the split
//! `ẋ = -(1/τ) Q (x - y) + B` with `Q = -[I/τ - H]⁻¹ H` and `B = ½ [I/τ - H]⁻¹ ∇Δ ln p_σ`.

use serde::Serialize;

use super::{score_sigma_derivative, CheckReport};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::prox::{exact_prox, exact_smoothed_prox, ProxProblem, REFERENCE_TOL};

pub const RK4_SUBSTEPS: usize = 16;
/// Gradient norm at which a projected state counts as on the critical manifold.
pub const NEWTON_PROJECTION_TOL: f64 = 1e-10;
/// Largest Newton correction accepted after an integration interval.
pub const MAX_PROJECTION: f64 = 1e-3;
const MAX_PROJECTION_STEPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathState {
    pub sigma_sq: f64,
    /// Projected point on the critical manifold.
    pub point: Vector,
    /// Integrated point before projection.
    pub ode_point: Vector,
    /// `-[∇²F_σ]⁻¹ ∂_{σ²}∇F_σ` at `point`.
    pub drift: Vector,
    pub q_term: Matrix,
    pub b_term: Vector,
    pub grad_norm: f64,
}

impl PathState {
    /// `-(1/τ) Q (x - y) + B`.
    pub fn split_drift(&self, problem: &ProxProblem) -> Vector {
        -(&self.q_term * (&self.point - problem.y())) / problem.tau() + &self.b_term
    }
}

fn drift(problem: &ProxProblem, sigma_sq: f64, x: &Vector) -> Result<Vector> {
    let rhs = score_sigma_derivative(problem.prior().as_ref(), sigma_sq, x)? * problem.tau();
    let hess = problem.smoothed_hessian(sigma_sq, x)?;
    solve_spd(hess, &rhs)
}

fn solve_spd(m: Matrix, rhs: &Vector) -> Result<Vector> {
    m.cholesky()
        .map(|c| c.solve(rhs))
        .ok_or_else(|| Error::NotLogConcave("Hessian of F_sigma is not positive definite".into()))
}

fn split_terms(problem: &ProxProblem, sigma_sq: f64, x: &Vector) -> Result<(Matrix, Vector)> {
    let d = problem.dimension();
    let prior = problem.prior();
    let der = prior.smoothed_derivatives(sigma_sq, x)?;
    let inv = (Matrix::identity(d, d) / problem.tau() - &der.hessian)
        .cholesky()
        .ok_or_else(|| Error::NotLogConcave("I/tau - H is not positive definite".into()))?
        .inverse();
    let q = -(&inv * &der.hessian);
    // Symmetrise: Q is symmetric in exact arithmetic since H and (I/τ - H)⁻¹ commute.
    let q = (&q + q.transpose()) * 0.5;
    let b = inv * der.third.laplacian_gradient() * 0.5;
    Ok((q, b))
}

fn project(problem: &ProxProblem, sigma_sq: f64, x: &Vector) -> Result<(Vector, f64)> {
    let mut point = x.clone();
    for _ in 0..MAX_PROJECTION_STEPS {
        let grad = problem.smoothed_gradient(sigma_sq, &point)?;
        let norm = grad.norm();
        if norm <= NEWTON_PROJECTION_TOL {
            break;
        }
        point -= solve_spd(problem.smoothed_hessian(sigma_sq, &point)?, &grad)?;
    }
    let correction = (&point - x).norm();
    if correction > MAX_PROJECTION {
        return Err(Error::ManifoldEscape { sigma_sq, correction });
    }
    let grad_norm = problem.smoothed_gradient(sigma_sq, &point)?.norm();
    Ok((point, grad_norm))
}

fn validate_grid(problem: &ProxProblem, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidProblem("sigma^2 grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidProblem("sigma^2 grid must be strictly decreasing".into()));
    }
    if !(grid[grid.len() - 1] > 0.0) || grid[0] > problem.tau() {
        return Err(Error::InvalidProblem("sigma^2 grid must lie in (0, tau]".into()));
    }
    Ok(())
}

/// Integrates the path ODE backward from `σ² = τ` with classical RK4
/// ([`RK4_SUBSTEPS`] substeps per interval), projecting onto `∇F_σ = 0` by Newton
/// after each interval.
pub fn solve_solution_path(problem: &ProxProblem, sigma_sq_grid: &[f64]) -> Result<Vec<PathState>> {
    validate_grid(problem, sigma_sq_grid)?;
    let tau = problem.tau();
    let mut x = exact_smoothed_prox(problem, tau, REFERENCE_TOL)?.point;
    let mut s_cur = tau;
    let mut states = Vec::with_capacity(sigma_sq_grid.len());
    for &s_next in sigma_sq_grid {
        let ode_point = if s_next == s_cur {
            x.clone()
        } else {
            let h = (s_next - s_cur) / RK4_SUBSTEPS as f64;
            let mut y = x.clone();
            for i in 0..RK4_SUBSTEPS {
                let t = s_cur + i as f64 * h;
                let k1 = drift(problem, t, &y)?;
                let k2 = drift(problem, t + 0.5 * h, &(&y + &k1 * (0.5 * h)))?;
                let k3 = drift(problem, t + 0.5 * h, &(&y + &k2 * (0.5 * h)))?;
                let k4 = drift(problem, t + h, &(&y + &k3 * h))?;
                y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
            y
        };
        let (point, grad_norm) = project(problem, s_next, &ode_point)?;
        let (q_term, b_term) = split_terms(problem, s_next, &point)?;
        states.push(PathState {
            sigma_sq: s_next,
            drift: drift(problem, s_next, &point)?,
            point: point.clone(),
            ode_point,
            q_term,
            b_term,
            grad_norm,
        });
        x = point;
        s_cur = s_next;
    }
    Ok(states)
}

/// `sigma_sq,x_1..x_d,drift_norm,grad_norm,B_norm`.
pub fn path_csv(states: &[PathState]) -> String {
    let d = states.first().map_or(0, |s| s.point.len());
    let mut out = String::from("sigma_sq");
    for i in 1..=d {
        out.push_str(&format!(",x_{i}"));
    }
    out.push_str(",drift_norm,grad_norm,B_norm\n");
    for s in states {
        out.push_str(&format!("{}", s.sigma_sq));
        for v in s.point.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{},{},{}\n", s.drift.norm(), s.grad_norm, s.b_term.norm()));
    }
    out
}

/// Boundedness `‖x*_σ - y‖ ≤ ‖y - x*‖ + ½τ²M√r` at every node and σ²-Lipschitz
/// continuity `‖x*_{σ₁} - x*_{σ₂}‖ ≤ (σ₁² - σ₂²)(‖y - x*‖/τ + τM√r)` on every pair,
/// with minimisers from Newton.
pub fn path_bounds_report(problem: &ProxProblem, sigma_sq_grid: &[f64]) -> Result<[CheckReport; 2]> {
    validate_grid(problem, sigma_sq_grid)?;
    let tau = problem.tau();
    let prior = problem.prior();
    let m_root_r = prior.third_derivative_bound() * (prior.effective_dimension() as f64).sqrt();
    let x_star = exact_prox(problem, REFERENCE_TOL)?.point;
    let gap = (problem.y() - &x_star).norm();
    let points = sigma_sq_grid
        .iter()
        .map(|&s2| exact_smoothed_prox(problem, s2, REFERENCE_TOL).map(|s| s.point))
        .collect::<Result<Vec<_>>>()?;

    let radius = gap + 0.5 * tau * tau * m_root_r;
    let bounded = points.iter().map(|x| radius - (x - problem.y()).norm()).collect();
    let lipschitz_const = gap / tau + tau * m_root_r;
    let mut lipschitz = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let bound = (sigma_sq_grid[i] - sigma_sq_grid[j]) * lipschitz_const;
            lipschitz.push(bound - (&points[i] - &points[j]).norm());
        }
    }
    let params = serde_json::json!({
        "sigma_sq": sigma_sq_grid,
        "tau": tau,
        "prox_gap": gap,
        "m_sqrt_r": m_root_r,
    });
    Ok([
        CheckReport::new("path_boundedness", params.clone(), bounded),
        CheckReport::new("path_lipschitz", params, lipschitz),
    ])
}

/// As [`path_bounds_report`], failing with [`Error::BoundViolated`] on a violation.
pub fn verify_path_bounds(problem: &ProxProblem, sigma_sq_grid: &[f64]) -> Result<[CheckReport; 2]> {
    let [a, b] = path_bounds_report(problem, sigma_sq_grid)?;
    Ok([a.into_result()?, b.into_result()?])
}
