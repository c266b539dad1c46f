use tweedie_prox::analysis::{path_bounds_report, path_csv, solve_solution_path};
use tweedie_prox::linalg::min_max_eigenvalue;
use tweedie_prox::prox::{exact_prox, exact_smoothed_prox, REFERENCE_TOL};
use tweedie_prox::{PriorSpec, ProxProblem};

use super::{parallel_map, positive, rng, seed, uniform_point, worst};
use crate::config::Params;
use crate::error::{invalid, Result};
use crate::output::Outputs;
use crate::priors::{self, named_priors, REGISTERED};
use crate::registry::{Experiment, KeySpec, Plan};

pub const EXPERIMENT: Experiment = Experiment {
    name: "path-ode",
    description: "Solution path sigma^2 -> argmin F_sigma by RK4 on its ODE, checked against Newton and the path bounds",
    claim: "the minimisers of F_sigma form a bounded, sigma^2-Lipschitz path ending at the proximal point",
    keys: &KEYS,
    plan,
};

const KEYS: [KeySpec; 5] = [
    KeySpec::new("priors", "[\"gaussian\", \"sech\", \"embedded-sech\"]", "named priors"),
    KeySpec::new("tau", "1", "regularisation weight; the path starts at sigma^2 = tau"),
    KeySpec::new("nodes", "20", "log-spaced sigma^2 nodes from tau down to min_ratio tau"),
    KeySpec::new("min_ratio", "1e-3", "smallest node as a fraction of tau"),
    KeySpec::new("anchor_scale", "3", "the anchor is uniform on [-scale, scale]^d"),
];

pub const ODE_TOL: f64 = 1e-6;
pub const DRIFT_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
/// Node at which the path is compared with the proximal point, as a fraction of tau.
pub const LIMIT_RATIO: f64 = 1e-6;
pub const LIMIT_TOL: f64 = 1e-4;

struct PathOde {
    priors: Vec<(String, PriorSpec)>,
    tau: f64,
    grid: Vec<f64>,
    anchor_scale: f64,
    seed: u64,
}

/// `n` nodes from `tau` down to `ratio * tau`, equally spaced in `ln sigma^2`.
pub fn log_nodes(tau: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![tau];
    }
    let step = ratio.ln() / (n - 1) as f64;
    (0..n).map(|i| tau * (step * i as f64).exp()).collect()
}

fn plan(params: &Params) -> Result<Box<dyn Plan>> {
    let names = params.string_list("priors", &REGISTERED)?;
    if names.is_empty() {
        return Err(params.violation("priors", "at least one prior is required"));
    }
    let priors = named_priors(params, "priors", &names)?;
    for (_, spec) in &priors {
        priors::build(spec)?;
    }
    let tau = positive(params, "tau", params.f64("tau", 1.0)?)?;
    let nodes = params.usize("nodes", 20)?;
    if nodes < 2 {
        return Err(params.violation("nodes", "need at least 2 nodes"));
    }
    let ratio = params.f64("min_ratio", 1e-3)?;
    if !(ratio > LIMIT_RATIO && ratio < 1.0) {
        return Err(params.violation("min_ratio", "min_ratio must lie in (1e-6, 1)"));
    }
    Ok(Box::new(PathOde {
        priors,
        tau,
        grid: log_nodes(tau, nodes, ratio),
        anchor_scale: positive(params, "anchor_scale", params.f64("anchor_scale", 3.0)?)?,
        seed: seed(params)?,
    }))
}

struct PriorResult {
    csv: String,
    bounds: serde_json::Value,
    checks: Vec<(String, bool, String)>,
}

impl PathOde {
    fn run(&self, index: usize) -> Result<PriorResult> {
        let (name, spec) = &self.priors[index];
        let prior = priors::build(spec)?;
        let m_root_r = prior.third_derivative_bound() * (prior.effective_dimension() as f64).sqrt();
        let y = uniform_point(&mut rng(self.seed, index as u64), prior.dimension(), self.anchor_scale);
        let problem = ProxProblem::new(y, self.tau, prior).map_err(invalid)?;
        let states = solve_solution_path(&problem, &self.grid)?;

        let mut ode_dev = Vec::new();
        let mut drift_dev = Vec::new();
        let mut b_excess = Vec::new();
        let mut q_min = Vec::new();
        for s in &states {
            let newton = exact_smoothed_prox(&problem, s.sigma_sq, REFERENCE_TOL)?.point;
            ode_dev.push((&s.ode_point - newton).norm());
            drift_dev.push((s.split_drift(&problem) - &s.drift).norm() / (1.0 + s.drift.norm()));
            b_excess.push(s.b_term.norm() - 0.5 * self.tau * m_root_r * (1.0 + 1e-9));
            q_min.push(min_max_eigenvalue(&s.q_term).0);
        }
        let (ode_worst, drift_worst) = (worst(ode_dev), worst(drift_dev));
        let (b_worst, q_worst) = (worst(b_excess), -worst(q_min.iter().map(|q| -q)));

        let mut limit_grid = self.grid.clone();
        limit_grid.push(LIMIT_RATIO * self.tau);
        let end = solve_solution_path(&problem, &limit_grid)?;
        let prox = exact_prox(&problem, REFERENCE_TOL)?.point;
        let limit_gap = (&end[end.len() - 1].point - prox).norm();

        let n = self.grid.len();
        let mut checks = vec![
            (
                format!("ode_vs_newton[{name}]"),
                ode_worst <= ODE_TOL,
                format!("max |x_ode - x_newton| = {ode_worst:.3e} over {n} nodes (tolerance {ODE_TOL:.0e})"),
            ),
            (
                format!("drift_consistency[{name}]"),
                drift_worst <= DRIFT_TOL,
                format!("max |split - direct| / (1 + |drift|) = {drift_worst:.3e}"),
            ),
            (
                format!("b_bound[{name}]"),
                b_worst <= 0.0,
                format!("max |B| - tau M sqrt(r)/2 = {b_worst:.3e}"),
            ),
            (
                format!("q_psd[{name}]"),
                q_worst >= -PSD_TOL,
                format!("smallest eigenvalue of Q = {q_worst:.3e}"),
            ),
            (
                format!("path_limit[{name}]"),
                limit_gap <= LIMIT_TOL,
                format!("|x*_sigma - prox| = {limit_gap:.3e} at sigma^2 = {LIMIT_RATIO:.0e} tau"),
            ),
        ];
        let reports = path_bounds_report(&problem, &self.grid)?;
        for r in &reports {
            checks.push((
                format!("{}[{name}]", r.name),
                r.passed,
                format!("min margin {:.4e} over {} comparisons", r.min_margin(), r.margins.len()),
            ));
        }
        Ok(PriorResult {
            csv: path_csv(&states),
            bounds: serde_json::json!({
                "prior": name,
                "y": problem.y().iter().collect::<Vec<_>>(),
                "reports": reports,
            }),
            checks,
        })
    }
}

impl Plan for PathOde {
    fn execute(&self, out: &mut Outputs) -> Result<()> {
        let indices: Vec<usize> = (0..self.priors.len()).collect();
        let results = parallel_map(&indices, |&i| self.run(i));
        for ((name, _), result) in self.priors.iter().zip(results) {
            let r = result?;
            for (check, passed, detail) in r.checks {
                out.check(&check, passed, detail);
            }
            out.file(&format!("path_ode_{name}.csv"), r.csv);
            out.json(&format!("path_bounds_{name}.json"), &r.bounds);
        }
        Ok(())
    }
}
