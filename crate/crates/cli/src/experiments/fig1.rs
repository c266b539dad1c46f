use std::sync::Arc;

use tweedie_prox::prox::exact_smoothed_prox;
use tweedie_prox::{GaussianPrior, ProxProblem, Vector};

use super::{f, positive, Csv};
use crate::config::Params;
use crate::error::{invalid, Result};
use crate::output::Outputs;
use crate::registry::{Experiment, KeySpec, Plan};

pub const EXPERIMENT: Experiment = Experiment {
    name: "fig1-levelsets",
    description: "Grid of F_sigma values over a 2D window for contour plots, Gaussian prior diag(1, 1/L)",
    claim: "level curves of the smoothed proximal objective",
    keys: &KEYS,
    plan,
};

const KEYS: [KeySpec; 7] = [
    KeySpec::new("tau", "1", "regularisation weight"),
    KeySpec::new("L", "999", "inverse variance of the second prior coordinate"),
    KeySpec::new("y", "[3, 3]", "anchor point"),
    KeySpec::new("sigma_sq", "[0, 0.01, 1]", "smoothing levels, one contour panel each"),
    KeySpec::new("window_lo", "[-1, -1]", "lower-left corner of the window"),
    KeySpec::new("window_hi", "[4, 4]", "upper-right corner of the window"),
    KeySpec::new("resolution", "101", "grid points per axis"),
];

/// Relative tolerance of the measured anisotropy against its closed form.
const ANISOTROPY_TOL: f64 = 1e-6;

struct Fig1 {
    problem: ProxProblem,
    tau: f64,
    l: f64,
    sigma_sq: Vec<f64>,
    lo: [f64; 2],
    hi: [f64; 2],
    n: usize,
}

fn corner(params: &Params, key: &str, default: [f64; 2]) -> Result<[f64; 2]> {
    let v = params.f64_list(key, &default)?;
    match v.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(params.violation(key, "expected two coordinates")),
    }
}

fn plan(params: &Params) -> Result<Box<dyn Plan>> {
    let tau = params.f64("tau", 1.0)?;
    if !(tau > 0.0) {
        return Err(params.violation("tau", "tau must be positive"));
    }
    let l = positive(params, "L", params.f64("L", 999.0)?)?;
    let y = params.vector("y", &[3.0, 3.0])?;
    if y.len() != 2 {
        return Err(params.violation("y", "expected two coordinates"));
    }
    let sigma_sq = params.f64_list("sigma_sq", &[0.0, 0.01, 1.0])?;
    if sigma_sq.is_empty() || sigma_sq.iter().any(|s| !(*s >= 0.0)) {
        return Err(params.violation("sigma_sq", "smoothing levels must be nonnegative"));
    }
    let lo = corner(params, "window_lo", [-1.0, -1.0])?;
    let hi = corner(params, "window_hi", [4.0, 4.0])?;
    if !(lo[0] < hi[0] && lo[1] < hi[1]) {
        return Err(params.violation("window_hi", "window must have positive extent"));
    }
    let n = params.usize("resolution", 101)?;
    if n < 3 {
        return Err(params.violation("resolution", "need at least 3 points per axis"));
    }
    let prior = GaussianPrior::diagonal(Vector::zeros(2), &[1.0, 1.0 / l]).map_err(invalid)?;
    let problem = ProxProblem::new(y, tau, Arc::new(prior)).map_err(invalid)?;
    Ok(Box::new(Fig1 {
        problem,
        tau,
        l,
        sigma_sq,
        lo,
        hi,
        n,
    }))
}

impl Plan for Fig1 {
    fn execute(&self, out: &mut Outputs) -> Result<()> {
        let n = self.n;
        let h = [(self.hi[0] - self.lo[0]) / (n - 1) as f64, (self.hi[1] - self.lo[1]) / (n - 1) as f64];
        let node = |i: usize, axis: usize| self.lo[axis] + i as f64 * h[axis];
        let mut grid = Csv::new("sigma_sq,x_1,x_2,F");
        let mut minimisers = Csv::new("sigma_sq,x_1,x_2");
        let mut aniso = Csv::new("sigma_sq,curvature_1,curvature_2,ratio,predicted");
        for &s2 in &self.sigma_sq {
            let mut values = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    let x = Vector::from_vec(vec![node(i, 0), node(j, 1)]);
                    let v = self.problem.smoothed_objective(s2, &x)?;
                    values[j * n + i] = v;
                    grid.row([f(s2), f(x[0]), f(x[1]), f(v)]);
                }
            }
            let m = exact_smoothed_prox(&self.problem, s2, 1e-12)?.point;
            minimisers.row([f(s2), f(m[0]), f(m[1])]);

            // Second differences at the central node; exact up to rounding for a quadratic.
            let c = n / 2;
            let at = |i: usize, j: usize| values[j * n + i];
            let d11 = (at(c + 1, c) - 2.0 * at(c, c) + at(c - 1, c)) / (h[0] * h[0]);
            let d22 = (at(c, c + 1) - 2.0 * at(c, c) + at(c, c - 1)) / (h[1] * h[1]);
            let ratio = d11.max(d22) / d11.min(d22);
            let predicted = (1.0 + self.tau * self.l / (1.0 + self.l * s2)) / (1.0 + self.tau / (1.0 + s2));
            aniso.row([f(s2), f(d11), f(d22), f(ratio), f(predicted)]);
            let rel = (ratio - predicted).abs() / predicted;
            out.check(
                &format!("anisotropy[sigma_sq={s2}]"),
                rel <= ANISOTROPY_TOL,
                format!("curvature ratio {ratio:.9} vs (1 + tau L/(1 + L s))/(1 + tau/(1 + s)) = {predicted:.9}"),
            );
        }
        out.note("prior", "gaussian, mean 0, covariance diag(1, 1/L)");
        out.note("condition_number_sigma0", (1.0 + self.tau * self.l) / (1.0 + self.tau));
        out.file("fig1_levelsets.csv", grid.finish());
        out.file("fig1_minimisers.csv", minimisers.finish());
        out.file("fig1_anisotropy.csv", aniso.finish());
        Ok(())
    }
}
