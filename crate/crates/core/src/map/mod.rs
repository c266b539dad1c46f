//! MAP estimation `argmin_x λ f(x) - ln p(x)` by (approximate) proximal gradient descent.

mod fidelity;
mod theorem2;

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

pub use fidelity::{DataFidelity, LinearGaussianFidelity};
pub use theorem2::{theorem2_constants, theorem2_report, verify_theorem2, Theorem2Constants, Theorem2Report};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::prior::PriorModel;
use crate::prox::{exact_prox, mmse_averaging_step, ProxProblem, Schedule, REFERENCE_TOL};
use crate::trace::{fmt_f64, fmt_opt, CsvRecord, IterateTrace, TraceMeta, Truncation};

/// Residual `‖x_{k+1} - x_k‖` at which exact PGD is considered converged.
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const MAX_FIXED_POINT_STEPS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct MapProblem {
    fidelity: Arc<dyn DataFidelity>,
    prior: Arc<dyn PriorModel>,
    lambda: f64,
    tau: f64,
    y: Vector,
}

impl MapProblem {
    /// Requires `τ λ L_f ≤ 1` (up to `1e-12`).
    pub fn new(
        fidelity: Arc<dyn DataFidelity>,
        prior: Arc<dyn PriorModel>,
        lambda: f64,
        tau: f64,
        y: Vector,
    ) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidProblem(format!("tau must be positive, got {tau}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidProblem(format!("lambda must be nonnegative, got {lambda}")));
        }
        let d = prior.dimension();
        for got in [fidelity.dimension(), y.len()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        let product = tau * lambda * fidelity.smoothness();
        if product > 1.0 + 1e-12 {
            return Err(Error::InvalidProblem(format!(
                "tau * lambda * L_f = {product} exceeds 1"
            )));
        }
        Ok(Self {
            fidelity,
            prior,
            lambda,
            tau,
            y,
        })
    }

    pub fn fidelity(&self) -> &Arc<dyn DataFidelity> {
        &self.fidelity
    }

    pub fn prior(&self) -> &Arc<dyn PriorModel> {
        &self.prior
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    /// `x - τ λ ∇f(x)`.
    pub fn gradient_point(&self, x: &Vector) -> Vector {
        x - self.fidelity.gradient(x) * (self.tau * self.lambda)
    }

    /// Proximal problem `prox_{-τ ln p}(anchor)`.
    pub fn prox_problem(&self, anchor: Vector) -> Result<ProxProblem> {
        ProxProblem::new(anchor, self.tau, self.prior.clone())
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "fidelity": self.fidelity.describe(),
            "prior": self.prior.spec(),
            "lambda": self.lambda,
            "tau": self.tau,
            "y": self.y.as_slice(),
            "third_derivative_bound": self.prior.third_derivative_bound(),
        })
    }
}

/// `J(x) = λ f(x) - ln p(x)`.
pub fn map_objective(problem: &MapProblem, x: &Vector) -> Result<f64> {
    let log_p = problem.prior.log_density_smoothed(0.0, x)?;
    Ok(problem.lambda * problem.fidelity.value(x) - log_p)
}

/// Inner iteration counts `n(k) = ⌊c k^{1+η}⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InnerSchedule {
    c: f64,
    eta: f64,
}

impl InnerSchedule {
    pub fn new(c: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidProblem(format!("eta must be positive, got {eta}")));
        }
        if !(c >= 1.0) || !c.is_finite() {
            return Err(Error::InvalidProblem(format!("n(1) = 0; c ≥ 1 required (got c = {c})")));
        }
        Ok(Self { c, eta })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn count(&self, k: usize) -> usize {
        (self.c * (k as f64).powf(1.0 + self.eta)).floor() as usize
    }

    /// `C_k = ((1+η) ln k + ln c + 7) / (c k^{1+η})`.
    pub fn error_factor(&self, k: usize) -> f64 {
        let kf = k as f64;
        ((1.0 + self.eta) * kf.ln() + self.c.ln() + 7.0) / (self.c * kf.powf(1.0 + self.eta))
    }
}

/// Anchor of the inner MMSE-averaging recursion at each outer step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerAnchor {
    /// `z = x̂_k - τ λ ∇f(x̂_k)`, so the inner loop approximates `prox(z)`.
    #[default]
    GradientPoint,
    /// The observation `y`, with the inner loop started at `z`.
    Observation,
}

impl InnerAnchor {
    pub fn name(self) -> &'static str {
        match self {
            InnerAnchor::GradientPoint => "gradient_point",
            InnerAnchor::Observation => "observation",
        }
    }
}

/// Reference solution of the MAP problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapReference {
    pub x_map: Vector,
    pub j_star: f64,
    pub grad_f_norm: f64,
    /// Final fixed-point residual (zero for closed forms).
    pub residual: f64,
    pub steps: usize,
}

/// `x*_MAP` by the normal equations for Gaussian priors with a linear fidelity, and by
/// exact PGD to a fixed-point residual of [`FIXED_POINT_TOL`] otherwise.
pub fn map_reference(problem: &MapProblem) -> Result<MapReference> {
    let finish = |x_map: Vector, residual: f64, steps: usize| -> Result<MapReference> {
        Ok(MapReference {
            j_star: map_objective(problem, &x_map)?,
            grad_f_norm: problem.fidelity.gradient(&x_map).norm(),
            x_map,
            residual,
            steps,
        })
    };
    if let (Some(g), Some(lin)) = (problem.prior.as_gaussian(), problem.fidelity.as_linear()) {
        let a = lin.operator();
        let prec = g.precision();
        let lhs: Matrix = a.transpose() * a * problem.lambda + &prec;
        let rhs = a.transpose() * lin.observation() * problem.lambda + &prec * g.mean();
        let x = lhs
            .cholesky()
            .ok_or_else(|| Error::InvalidProblem("MAP normal equations are singular".into()))?
            .solve(&rhs);
        return finish(x, 0.0, 0);
    }
    let mut x = problem.y.clone();
    for step in 1..=MAX_FIXED_POINT_STEPS {
        let next = exact_prox(&problem.prox_problem(problem.gradient_point(&x))?, REFERENCE_TOL)?.point;
        let residual = (&next - &x).norm();
        x = next;
        if residual <= FIXED_POINT_TOL {
            return finish(x, residual, step);
        }
    }
    Err(Error::FixedPointNotFound(MAX_FIXED_POINT_STEPS))
}

/// Row for iterate `x_k`, `k ≥ 1`, of exact proximal gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PgdStep {
    pub k: usize,
    pub j: f64,
    pub residual: f64,
}

impl CsvRecord for PgdStep {
    fn header() -> &'static str {
        "k,J,residual"
    }

    fn fields(&self) -> Vec<String> {
        vec![self.k.to_string(), fmt_f64(self.j), fmt_f64(self.residual)]
    }
}

/// `x_{k+1} = prox_{-τ ln p}(x_k - τ λ ∇f(x_k))` from `x_0 = y`.
pub fn exact_pgd(problem: &MapProblem, outer_steps: usize) -> Result<IterateTrace<PgdStep>> {
    let start = Instant::now();
    let meta = TraceMeta {
        algorithm: "exact-pgd".into(),
        schedule: String::new(),
        problem: problem.describe(),
        wall_time_secs: 0.0,
    };
    let mut trace = IterateTrace::new(problem.y.clone(), meta);
    for k in 1..=outer_steps {
        let x = trace.last();
        let next = exact_prox(&problem.prox_problem(problem.gradient_point(x))?, REFERENCE_TOL)?.point;
        let row = PgdStep {
            k,
            j: map_objective(problem, &next)?,
            residual: (&next - x).norm(),
        };
        trace.push(next, row);
    }
    trace.meta.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(trace)
}

/// Row for the approximate iterate `x̂_k`, `k ≥ 1`.
///
/// `x_k = prox(x̂_{k-1} - τλ∇f(x̂_{k-1}))` is the exact proximal step from the previous
/// approximate iterate; the verification columns are empty when no reference is used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapStep {
    pub k: usize,
    pub n_inner: usize,
    pub j_hat: f64,
    pub j_exact_prox_iterate: Option<f64>,
    pub eps: Option<f64>,
    pub eps_bound: Option<f64>,
    /// `(1/k) Σ_{i≤k} (J(x_i) - J*)`.
    pub avg_gap: Option<f64>,
    pub avg_gap_bound: Option<f64>,
}

impl CsvRecord for MapStep {
    fn header() -> &'static str {
        "k,n_inner,J_hat,J_exact_prox_iterate,eps,eps_bound,avg_gap,avg_gap_bound"
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            self.n_inner.to_string(),
            fmt_f64(self.j_hat),
            fmt_opt(self.j_exact_prox_iterate),
            fmt_opt(self.eps),
            fmt_opt(self.eps_bound),
            fmt_opt(self.avg_gap),
            fmt_opt(self.avg_gap_bound),
        ]
    }
}

#[derive(Debug, Clone, Default)]
pub struct ApproxPgdOptions {
    pub anchor: InnerAnchor,
    /// Fill the verification columns against this reference and these constants.
    pub verification: Option<(MapReference, Theorem2Constants)>,
}

/// Algorithm 1 with the default inner schedule anchored at the gradient-step point.
pub fn approx_pgd(problem: &MapProblem, inner: &InnerSchedule, outer_steps: usize) -> Result<IterateTrace<MapStep>> {
    approx_pgd_with(problem, inner, outer_steps, &ApproxPgdOptions::default())
}

pub fn approx_pgd_with(
    problem: &MapProblem,
    inner: &InnerSchedule,
    outer_steps: usize,
    options: &ApproxPgdOptions,
) -> Result<IterateTrace<MapStep>> {
    if outer_steps == 0 {
        return Err(Error::InvalidProblem("outer_steps must be at least 1".into()));
    }
    let start = Instant::now();
    let schedule = Schedule::paper_default(problem.tau)?;
    let meta = TraceMeta {
        algorithm: format!("approx-pgd/{}", options.anchor.name()),
        schedule: format!("n(k) = floor({} k^(1+{}))", inner.c, inner.eta),
        problem: problem.describe(),
        wall_time_secs: 0.0,
    };
    let mut trace = IterateTrace::new(problem.y.clone(), meta);
    let mut gap_sum = 0.0;
    'outer: for k in 1..=outer_steps {
        let x_prev = trace.last().clone();
        let z = problem.gradient_point(&x_prev);
        let anchor = match options.anchor {
            InnerAnchor::GradientPoint => z.clone(),
            InnerAnchor::Observation => problem.y.clone(),
        };
        let inner_problem = problem.prox_problem(anchor)?;
        let n_inner = inner.count(k);
        let mut x = z.clone();
        for i in 0..n_inner {
            match mmse_averaging_step(&inner_problem, &schedule, i, &x) {
                Ok(next) => x = next,
                Err(e @ Error::Divergence { .. }) => {
                    trace.truncation = Some(Truncation {
                        step: k - 1,
                        reason: e.to_string(),
                    });
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        let mut row = MapStep {
            k,
            n_inner,
            j_hat: map_objective(problem, &x)?,
            j_exact_prox_iterate: None,
            eps: None,
            eps_bound: None,
            avg_gap: None,
            avg_gap_bound: None,
        };
        if let Some((reference, constants)) = &options.verification {
            let x_exact = exact_prox(&problem.prox_problem(z)?, REFERENCE_TOL)?.point;
            let j_exact = map_objective(problem, &x_exact)?;
            gap_sum += j_exact - reference.j_star;
            row.j_exact_prox_iterate = Some(j_exact);
            row.eps = Some((&x - &x_exact).norm());
            row.eps_bound = Some(inner.error_factor(k) * constants.r);
            row.avg_gap = Some(gap_sum / k as f64);
            row.avg_gap_bound = Some(constants.averaged_gap_bound(k));
        }
        trace.push(x, row);
    }
    trace.meta.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(trace)
}
