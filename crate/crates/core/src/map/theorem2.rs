use serde::Serialize;

use super::{approx_pgd_with, map_reference, ApproxPgdOptions, InnerSchedule, MapProblem, MapReference, MapStep};
use crate::error::{Error, Result};
use crate::trace::IterateTrace;

/// Constants of the approximate PGD guarantee for inner counts `⌊c k^{1+η}⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem2Constants {
    pub eta: f64,
    pub c: f64,
    pub tau: f64,
    /// `‖y - x*_MAP‖`.
    pub initial_gap: f64,
    /// `τ λ ‖∇f(x*_MAP)‖ + τ² M √r`.
    pub a: f64,
    /// Bounds `Σ C_k`, and hence `Σ‖ε_k‖ ≤ S R`.
    pub s: f64,
    /// `Σ‖ε_k‖² ≤ T R²`.
    pub t: f64,
    pub b: f64,
    pub r: f64,
}

impl Theorem2Constants {
    pub fn s_constant(eta: f64, c: f64) -> f64 {
        (1.0 + eta) / (c * eta * eta) * (1.0 + eta * (c.ln() + 7.0))
    }

    pub fn t_constant(eta: f64, c: f64) -> f64 {
        let q = 2.0 * eta + 1.0;
        4.0 * (1.0 + eta).powi(2) / (c * c * q.powi(3)) + 2.0 * (c.ln() + 7.0).powi(2) / (c * c) * (1.0 + 1.0 / q)
    }

    pub fn from_parts(problem: &MapProblem, inner: &InnerSchedule, initial_gap: f64, grad_f_norm: f64) -> Self {
        let (eta, c, tau) = (inner.eta(), inner.c(), problem.tau());
        let prior = problem.prior();
        let r_dim = prior.effective_dimension() as f64;
        let a = tau * problem.lambda() * grad_f_norm + tau * tau * prior.third_derivative_bound() * r_dim.sqrt();
        let s = Self::s_constant(eta, c);
        let t = Self::t_constant(eta, c);
        let b = (2.0 * s).exp() * (initial_gap + s * a);
        Self {
            eta,
            c,
            tau,
            initial_gap,
            a,
            s,
            t,
            b,
            r: 2.0 * b + a,
        }
    }

    /// `(‖y - x*‖² + T R² + 2 R · S R) / (2 τ K)`.
    pub fn averaged_gap_bound(&self, k: usize) -> f64 {
        let r = self.r;
        (self.initial_gap.powi(2) + self.t * r * r + 2.0 * r * self.s * r) / (2.0 * self.tau * k as f64)
    }
}

pub fn theorem2_constants(problem: &MapProblem, inner: &InnerSchedule) -> Result<Theorem2Constants> {
    let reference = map_reference(problem)?;
    Ok(constants_for(problem, inner, &reference))
}

fn constants_for(problem: &MapProblem, inner: &InnerSchedule, reference: &MapReference) -> Theorem2Constants {
    let gap = (problem.y() - &reference.x_map).norm();
    Theorem2Constants::from_parts(problem, inner, gap, reference.grad_f_norm)
}

/// Side-by-side run of Algorithm 1 against the exact proximal steps it approximates.
#[derive(Debug, Clone)]
pub struct Theorem2Report {
    pub constants: Theorem2Constants,
    pub reference: MapReference,
    pub trace: IterateTrace<MapStep>,
}

impl Theorem2Report {
    /// `eps_bound - eps` per outer step.
    pub fn eps_margins(&self) -> Vec<f64> {
        self.trace
            .steps
            .iter()
            .map(|r| r.eps_bound.unwrap_or(f64::NAN) - r.eps.unwrap_or(f64::NAN))
            .collect()
    }

    /// `avg_gap_bound - avg_gap` per outer step.
    pub fn gap_margins(&self) -> Vec<f64> {
        self.trace
            .steps
            .iter()
            .map(|r| r.avg_gap_bound.unwrap_or(f64::NAN) - r.avg_gap.unwrap_or(f64::NAN))
            .collect()
    }

    /// First violated bound, if any.
    pub fn first_violation(&self) -> Option<Error> {
        for row in &self.trace.steps {
            let (eps, eps_bound) = (row.eps?, row.eps_bound?);
            if !(eps <= eps_bound) {
                return Some(Error::BoundViolated {
                    check: "eps".into(),
                    index: row.k,
                    value: eps,
                    bound: eps_bound,
                });
            }
            let (gap, gap_bound) = (row.avg_gap?, row.avg_gap_bound?);
            if !(gap <= gap_bound) {
                return Some(Error::BoundViolated {
                    check: "avg_gap".into(),
                    index: row.k,
                    value: gap,
                    bound: gap_bound,
                });
            }
        }
        if let Some(t) = &self.trace.truncation {
            return Some(Error::Divergence {
                step: t.step,
                norm: f64::INFINITY,
            });
        }
        None
    }

    pub fn passed(&self) -> bool {
        self.first_violation().is_none()
    }
}

/// Runs the comparison and returns the report whether or not the bounds hold.
pub fn theorem2_report(problem: &MapProblem, inner: &InnerSchedule, outer_steps: usize) -> Result<Theorem2Report> {
    let reference = map_reference(problem)?;
    let constants = constants_for(problem, inner, &reference);
    let options = ApproxPgdOptions {
        anchor: super::InnerAnchor::GradientPoint,
        verification: Some((reference.clone(), constants)),
    };
    let trace = approx_pgd_with(problem, inner, outer_steps, &options)?;
    Ok(Theorem2Report {
        constants,
        reference,
        trace,
    })
}

/// As [`theorem2_report`], failing with [`Error::BoundViolated`] on the first violation.
pub fn verify_theorem2(problem: &MapProblem, inner: &InnerSchedule, outer_steps: usize) -> Result<Theorem2Report> {
    let report = theorem2_report(problem, inner, outer_steps)?;
    match report.first_violation() {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
