//! Reference minimisers of `F` and `F_σ`.

use nalgebra::Cholesky;
use serde::Serialize;

use super::ProxProblem;
use crate::error::{Error, Result};
use crate::linalg::{min_max_eigenvalue, Vector};

pub const MAX_NEWTON_STEPS: usize = 200;
const ARMIJO: f64 = 0.25;
const MAX_HALVINGS: usize = 60;
/// Smallest Hessian eigenvalue of `F_σ` tolerated before declaring non-log-concavity.
const STRONG_CONVEXITY_FLOOR: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxSolution {
    pub point: Vector,
    pub gradient_norm: f64,
    pub newton_iters: usize,
}

/// `prox_{-τ ln p}(y) = argmin F`.
pub fn exact_prox(problem: &ProxProblem, tol: f64) -> Result<ProxSolution> {
    exact_smoothed_prox(problem, 0.0, tol)
}

/// `x*_σ = argmin F_σ`, by closed form for Gaussian priors, by reduction to the
/// intrinsic coordinates for subspace priors, and by damped Newton otherwise.
pub fn exact_smoothed_prox(problem: &ProxProblem, sigma_sq: f64, tol: f64) -> Result<ProxSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidProblem(format!("tolerance must be positive, got {tol}")));
    }
    let prior = problem.prior();
    if let Some(g) = prior.as_gaussian() {
        // Eigenbasis coordinates: c_x = c_y (λ + σ²) / (λ + σ² + τ).
        let q = g.eigenvectors();
        let cy = q.transpose() * (problem.y() - g.mean());
        let cx = Vector::from_fn(cy.len(), |i, _| {
            let v = g.eigenvalues()[i] + sigma_sq;
            cy[i] * v / (v + problem.tau())
        });
        let point = g.mean() + q * cx;
        let gradient_norm = problem.smoothed_gradient(sigma_sq, &point)?.norm();
        return Ok(ProxSolution {
            point,
            gradient_norm,
            newton_iters: 0,
        });
    }
    if let Some(e) = prior.as_embedded() {
        let t_y = e.coordinates(problem.y());
        let inner = ProxProblem::new(t_y, problem.tau(), e.base().clone())?;
        let sol = exact_smoothed_prox(&inner, sigma_sq, tol)?;
        let mut point = e.embed(&sol.point);
        if sigma_sq > 0.0 {
            let normal = problem.y() - e.project(problem.y());
            point += normal * (sigma_sq / (sigma_sq + problem.tau()));
        }
        // At σ = 0 the ambient gradient does not exist; report the intrinsic one.
        let gradient_norm = if sigma_sq > 0.0 {
            problem.smoothed_gradient(sigma_sq, &point)?.norm()
        } else {
            sol.gradient_norm
        };
        return Ok(ProxSolution {
            point,
            gradient_norm,
            newton_iters: sol.newton_iters,
        });
    }
    damped_newton(problem, sigma_sq, tol)
}

fn damped_newton(problem: &ProxProblem, sigma_sq: f64, tol: f64) -> Result<ProxSolution> {
    let prior = problem.prior();
    let tau = problem.tau();
    let y = problem.y();
    let objective = |x: &Vector, log_p: f64| 0.5 * (y - x).norm_squared() - tau * log_p;

    let mut x = y.clone();
    let mut state = prior.smoothed_derivatives(sigma_sq, &x)?;
    for iter in 0..=MAX_NEWTON_STEPS {
        let grad = &x - y - &state.score * tau;
        let gnorm = grad.norm();
        if gnorm <= tol {
            return Ok(ProxSolution {
                point: x,
                gradient_norm: gnorm,
                newton_iters: iter,
            });
        }
        if iter == MAX_NEWTON_STEPS {
            break;
        }
        let d = x.len();
        let hess = nalgebra::DMatrix::identity(d, d) - &state.hessian * tau;
        let (lo, _) = min_max_eigenvalue(&hess);
        if lo < STRONG_CONVEXITY_FLOOR {
            return Err(Error::NotLogConcave(format!(
                "Hessian of F has eigenvalue {lo:.6e} < 1 at x = {:?}",
                x.as_slice()
            )));
        }
        let dir = -Cholesky::new(hess)
            .ok_or_else(|| Error::NotLogConcave("Hessian of F is not positive definite".into()))?
            .solve(&grad);
        let slope = grad.dot(&dir);
        let f0 = objective(&x, state.log_density);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            // Below the rounding level of F the sufficient-decrease test would accept
            // vanishing steps; the full-step fallback below takes over there.
            if -slope * step <= 1e-14 * (1.0 + f0.abs()) {
                break;
            }
            let trial = &x + &dir * step;
            if let Ok(next) = prior.smoothed_derivatives(sigma_sq, &trial) {
                if objective(&trial, next.log_density) <= f0 + ARMIJO * step * slope {
                    accepted = Some((trial, next));
                    break;
                }
            }
            step *= 0.5;
        }
        let (next_x, next_state) = match accepted {
            Some(pair) => pair,
            None => {
                // Accept the full step if it still shrinks the gradient.
                let trial = &x + &dir;
                let next = prior.smoothed_derivatives(sigma_sq, &trial)?;
                let next_grad = (&trial - y - &next.score * tau).norm();
                if next_grad < gnorm {
                    (trial, next)
                } else {
                    return Err(Error::LineSearchFailed(gnorm));
                }
            }
        };
        x = next_x;
        state = next_state;
    }
    Err(Error::MaxIterations(MAX_NEWTON_STEPS))
}
