//! MMSE averaging as an approximation of `prox_{-τ ln p}`.

mod newton;
mod schedule;

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

pub use newton::{exact_prox, exact_smoothed_prox, ProxSolution, MAX_NEWTON_STEPS};
pub use schedule::Schedule;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::prior::PriorModel;
use crate::trace::{fmt_f64, fmt_opt, CsvRecord, IterateTrace, TraceMeta, Truncation};

/// Iterates whose norm exceeds `DIVERGENCE_FACTOR · (1 + ‖y‖)` abort a run.
pub const DIVERGENCE_FACTOR: f64 = 1e8;
/// Tolerance of the default reference minimiser.
pub const REFERENCE_TOL: f64 = 1e-12;

/// `F(x) = ½‖y - x‖² - τ ln p(x)` and its smoothed versions `F_σ`.
#[derive(Debug, Clone)]
pub struct ProxProblem {
    y: Vector,
    tau: f64,
    prior: Arc<dyn PriorModel>,
}

impl ProxProblem {
    pub fn new(y: Vector, tau: f64, prior: Arc<dyn PriorModel>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidProblem(format!("tau must be positive, got {tau}")));
        }
        if y.len() != prior.dimension() {
            return Err(Error::DimensionMismatch {
                expected: prior.dimension(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("anchor point y"));
        }
        Ok(Self { y, tau, prior })
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn prior(&self) -> &Arc<dyn PriorModel> {
        &self.prior
    }

    pub fn dimension(&self) -> usize {
        self.y.len()
    }

    pub fn with_anchor(&self, y: Vector) -> Result<Self> {
        Self::new(y, self.tau, self.prior.clone())
    }

    pub fn objective(&self, x: &Vector) -> Result<f64> {
        self.smoothed_objective(0.0, x)
    }

    pub fn smoothed_objective(&self, sigma_sq: f64, x: &Vector) -> Result<f64> {
        let log_p = self.prior.log_density_smoothed(sigma_sq, x)?;
        Ok(0.5 * (&self.y - x).norm_squared() - self.tau * log_p)
    }

    /// `∇F_σ(x) = (x - y) - τ ∇ln p_σ(x)`.
    pub fn smoothed_gradient(&self, sigma_sq: f64, x: &Vector) -> Result<Vector> {
        let score = self.prior.score_smoothed(sigma_sq, x)?;
        Ok(x - &self.y - score * self.tau)
    }

    /// `∇²F_σ(x) = I - τ ∇² ln p_σ(x)`.
    pub fn smoothed_hessian(&self, sigma_sq: f64, x: &Vector) -> Result<Matrix> {
        let d = self.dimension();
        let h = self.prior.hessian_smoothed(sigma_sq, x)?;
        Ok(Matrix::identity(d, d) - h * self.tau)
    }

    /// Smoothness constant `L_σ = 1 + τ/σ²` of `F_σ` for a log-concave prior.
    pub fn smoothness(&self, sigma_sq: f64) -> f64 {
        1.0 + self.tau / sigma_sq
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "y": self.y.as_slice(),
            "tau": self.tau,
            "prior": self.prior.spec(),
            "third_derivative_bound": self.prior.third_derivative_bound(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepForm {
    /// `x ← α MMSE_σ(x) + (1 - α) y`.
    Averaging,
    /// `x ← x - γ ∇F_σ(x)`.
    Gradient,
}

impl StepForm {
    pub fn name(self) -> &'static str {
        match self {
            StepForm::Averaging => "averaging",
            StepForm::Gradient => "gradient",
        }
    }
}

/// Point the errors of a run are measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// `exact_prox` at [`REFERENCE_TOL`] when the prior supports it, otherwise none.
    Exact,
    Given(Vector),
    None,
}

fn guard(problem: &ProxProblem, k: usize, x: Vector) -> Result<Vector> {
    let norm = x.norm();
    if !norm.is_finite() || norm > DIVERGENCE_FACTOR * (1.0 + problem.y.norm()) {
        return Err(Error::Divergence { step: k, norm });
    }
    Ok(x)
}

pub fn mmse_averaging_step(problem: &ProxProblem, schedule: &Schedule, k: usize, x: &Vector) -> Result<Vector> {
    let alpha = schedule.alpha(k)?;
    let sigma_sq = schedule.sigma_sq(k)?;
    let denoised = problem.prior.mmse(sigma_sq, x)?;
    guard(problem, k, denoised * alpha + &problem.y * (1.0 - alpha))
}

pub fn smoothed_gd_step(problem: &ProxProblem, schedule: &Schedule, k: usize, x: &Vector) -> Result<Vector> {
    let gamma = schedule.gamma(k)?;
    let sigma_sq = schedule.sigma_sq(k)?;
    if gamma == 0.0 {
        return Ok(x.clone());
    }
    let grad = problem.smoothed_gradient(sigma_sq, x)?;
    guard(problem, k, x - grad * gamma)
}

/// Diagnostics for iterate `x_k`, `k ≥ 1`, produced by step `k - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxStep {
    pub k: usize,
    pub sigma_sq: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub err: Option<f64>,
    pub bound: Option<f64>,
    /// `F_σ(x_k)` at the noise level used to produce `x_k`.
    pub obj: f64,
}

impl CsvRecord for ProxStep {
    fn header() -> &'static str {
        "k,sigma_sq,alpha,gamma,err,bound,obj"
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            fmt_f64(self.sigma_sq),
            fmt_f64(self.alpha),
            fmt_f64(self.gamma),
            fmt_opt(self.err),
            fmt_opt(self.bound),
            fmt_f64(self.obj),
        ]
    }
}

/// `((ln k) + 7)/(k + 1) · (‖y - x*‖ + τ² M √r)`, with `r` the effective dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Bound {
    pub initial_gap: f64,
    pub curvature_term: f64,
}

impl Theorem1Bound {
    pub fn new(problem: &ProxProblem, prox_point: &Vector) -> Self {
        let prior = problem.prior();
        let r = prior.effective_dimension() as f64;
        Self {
            initial_gap: (problem.y() - prox_point).norm(),
            curvature_term: problem.tau().powi(2) * prior.third_derivative_bound() * r.sqrt(),
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        let k = k as f64;
        (k.ln() + 7.0) / (k + 1.0) * (self.initial_gap + self.curvature_term)
    }
}

pub fn theorem1_bound(problem: &ProxProblem, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidProblem("the bound is stated for k >= 1".into()));
    }
    let x_star = exact_prox(problem, REFERENCE_TOL)?;
    Ok(Theorem1Bound::new(problem, &x_star.point).at(k))
}

fn resolve_reference(problem: &ProxProblem, reference: &Reference) -> Result<Option<Vector>> {
    match reference {
        Reference::Given(v) => {
            if v.len() != problem.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: problem.dimension(),
                    got: v.len(),
                });
            }
            Ok(Some(v.clone()))
        }
        Reference::None => Ok(None),
        Reference::Exact => match exact_prox(problem, REFERENCE_TOL) {
            Ok(sol) => Ok(Some(sol.point)),
            Err(Error::NotLogConcave(_)) | Err(Error::NonFinite(_)) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// Runs `n_steps` of the recursion from `x_0 = y`.
///
/// A [`Error::Divergence`] ends the run early and is recorded in
/// [`IterateTrace::truncation`]; other failures are returned as errors.
pub fn run_prox_iteration(
    problem: &ProxProblem,
    schedule: &Schedule,
    n_steps: usize,
    form: StepForm,
    reference: &Reference,
) -> Result<IterateTrace<ProxStep>> {
    if n_steps == 0 {
        return Err(Error::InvalidProblem("n_steps must be at least 1".into()));
    }
    let start = Instant::now();
    let reference = resolve_reference(problem, reference)?;
    let bound = match (&reference, schedule) {
        (Some(r), Schedule::PaperDefault { .. }) => Some(Theorem1Bound::new(problem, r)),
        _ => None,
    };
    let meta = TraceMeta {
        algorithm: format!("mmse-averaging/{}", form.name()),
        schedule: schedule.kind().to_string(),
        problem: problem.describe(),
        wall_time_secs: 0.0,
    };
    let mut trace = IterateTrace::new(problem.y.clone(), meta);
    for step in 0..n_steps {
        let x = trace.last();
        let next = match form {
            StepForm::Averaging => mmse_averaging_step(problem, schedule, step, x),
            StepForm::Gradient => smoothed_gd_step(problem, schedule, step, x),
        };
        let next = match next {
            Ok(v) => v,
            Err(e @ Error::Divergence { .. }) => {
                trace.truncation = Some(Truncation {
                    step,
                    reason: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        };
        let k = step + 1;
        let sigma_sq = schedule.sigma_sq(step)?;
        let row = ProxStep {
            k,
            sigma_sq,
            alpha: schedule.alpha(step)?,
            gamma: schedule.gamma(step)?,
            err: reference.as_ref().map(|r| (&next - r).norm()),
            bound: bound.map(|b| b.at(k)),
            obj: problem.smoothed_objective(sigma_sq, &next)?,
        };
        trace.push(next, row);
    }
    trace.meta.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(trace)
}

/// Diagnostics for plain gradient descent on the unsmoothed `F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GdStep {
    pub k: usize,
    pub gamma: f64,
    pub err: Option<f64>,
    pub obj: f64,
}

impl CsvRecord for GdStep {
    fn header() -> &'static str {
        "k,sigma_sq,alpha,gamma,err,bound,obj"
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            "0".into(),
            String::new(),
            fmt_f64(self.gamma),
            fmt_opt(self.err),
            String::new(),
            fmt_f64(self.obj),
        ]
    }
}

/// `x_{k+1} = x_k - γ ∇F(x_k)` from `x_0 = y`.
pub fn naive_gd(
    problem: &ProxProblem,
    gamma: f64,
    n_steps: usize,
    reference: &Reference,
) -> Result<IterateTrace<GdStep>> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidProblem(format!("step size must be nonnegative, got {gamma}")));
    }
    let start = Instant::now();
    let reference = resolve_reference(problem, reference)?;
    let meta = TraceMeta {
        algorithm: "naive-gd".into(),
        schedule: format!("constant gamma = {gamma}"),
        problem: problem.describe(),
        wall_time_secs: 0.0,
    };
    let mut trace = IterateTrace::new(problem.y.clone(), meta);
    for step in 0..n_steps {
        let x = trace.last();
        let next = problem
            .smoothed_gradient(0.0, x)
            .and_then(|g| guard(problem, step, x - g * gamma));
        let next = match next {
            Ok(v) => v,
            Err(e @ Error::Divergence { .. }) => {
                trace.truncation = Some(Truncation {
                    step,
                    reason: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        };
        let row = GdStep {
            k: step + 1,
            gamma,
            err: reference.as_ref().map(|r| (&next - r).norm()),
            obj: problem.objective(&next)?,
        };
        trace.push(next, row);
    }
    trace.meta.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(trace)
}

#[cfg(test)]
mod tests;
