use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use tweedie_prox::analysis::fit_rate;
use tweedie_prox::prox::{exact_prox, run_prox_iteration, REFERENCE_TOL};
use tweedie_prox::{GaussianPrior, Matrix, ProxProblem, Reference, Schedule, StepForm, Vector};

use super::{f, positive, rng, seed, Csv};
use crate::config::Params;
use crate::error::{invalid, Result};
use crate::output::Outputs;
use crate::registry::{Experiment, KeySpec, Plan};

pub const EXPERIMENT: Experiment = Experiment {
    name: "gaussian-exact-rate",
    description: "MMSE averaging on random Gaussian priors against the exact error (y - x*)/(k+1)",
    claim: "exact convergence rate for Gaussian priors",
    keys: &KEYS,
    plan,
};

const KEYS: [KeySpec; 7] = [
    KeySpec::new("dims", "[1, 2, 10]", "dimensions to test"),
    KeySpec::new("taus", "[0.1, 1]", "regularisation weights"),
    KeySpec::new("max_condition", "1000", "condition number of the random covariances"),
    KeySpec::new("k_max", "10000", "iterations per run"),
    KeySpec::new("check_k_max", "1000", "iterations covered by the exactness check"),
    KeySpec::new("tolerance", "1e-10", "allowed relative deviation from the exact error"),
    KeySpec::new("slope_k_min", "100", "start of the log-log rate fit"),
];

/// Accepted range of the fitted log-log slope.
pub const SLOPE_RANGE: (f64, f64) = (-1.15, -0.85);

struct GaussianRate {
    dims: Vec<usize>,
    taus: Vec<f64>,
    max_condition: f64,
    k_max: usize,
    check_k_max: usize,
    tolerance: f64,
    slope_k_min: usize,
    seed: u64,
}

fn plan(params: &Params) -> Result<Box<dyn Plan>> {
    let dims = params.usize_list("dims", &[1, 2, 10])?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(params.violation("dims", "dimensions must be positive"));
    }
    let taus = params.f64_list("taus", &[0.1, 1.0])?;
    for &t in &taus {
        positive(params, "taus", t).map_err(|_| params.violation("taus", "tau must be positive"))?;
    }
    let max_condition = params.f64("max_condition", 1e3)?;
    if !(max_condition >= 1.0) {
        return Err(params.violation("max_condition", "condition number must be at least 1"));
    }
    let k_max = params.usize("k_max", 10_000)?;
    let check_k_max = params.usize("check_k_max", 1000)?.min(k_max);
    let slope_k_min = params.usize("slope_k_min", 100)?;
    if slope_k_min < 10 || k_max < slope_k_min + 9 {
        return Err(params.violation("k_max", "need slope_k_min >= 10 and k_max >= slope_k_min + 9"));
    }
    Ok(Box::new(GaussianRate {
        dims,
        taus,
        max_condition,
        k_max,
        check_k_max,
        tolerance: positive(params, "tolerance", params.f64("tolerance", 1e-10)?)?,
        slope_k_min,
        seed: seed(params)?,
    }))
}

/// Random covariance with eigenvalues log-spaced between `s / cond` and `s` (extremes included),
/// `s = 10^U(-1, 0)`, and Haar-like eigenvectors from a QR factorisation.
///
/// Variances stay at most 1 so that `y - x*` is not lost below the resolution of `y`.
pub fn random_gaussian(rng: &mut impl Rng, d: usize, cond: f64) -> tweedie_prox::Result<GaussianPrior> {
    let scale = 10f64.powf(rng.random_range(-1.0..=0.0));
    let eigenvalues = Vector::from_iterator(
        d,
        (0..d).map(|i| {
            let t = match (i, d) {
                (_, 1) => rng.random_range(0.0..=1.0),
                (0, _) => 0.0,
                (i, d) if i == d - 1 => 1.0,
                _ => rng.random_range(0.0..=1.0),
            };
            scale * cond.powf(-t)
        }),
    );
    let g = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let mean = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    GaussianPrior::new(mean, eigenvalues, q)
}

#[derive(Serialize)]
struct RunRecord {
    d: usize,
    tau: f64,
    eigenvalues: Vec<f64>,
    y: Vec<f64>,
    prox: Vec<f64>,
    max_rel_dev: f64,
    slope: f64,
}

impl Plan for GaussianRate {
    fn execute(&self, out: &mut Outputs) -> Result<()> {
        let mut csv = Csv::new("d,tau,k,err,predicted,rel_dev");
        let mut records = Vec::new();
        let mut stream = 0;
        for &d in &self.dims {
            for &tau in &self.taus {
                let mut rng = rng(self.seed, stream);
                stream += 1;
                let prior = random_gaussian(&mut rng, d, self.max_condition).map_err(invalid)?;
                let y = prior.mean() + Vector::from_fn(d, |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
                let eigenvalues = prior.eigenvalues().iter().copied().collect();
                let problem = ProxProblem::new(y.clone(), tau, Arc::new(prior)).map_err(invalid)?;
                let prox = exact_prox(&problem, REFERENCE_TOL)?.point;
                let trace = run_prox_iteration(
                    &problem,
                    &Schedule::paper_default(tau)?,
                    self.k_max,
                    StepForm::Averaging,
                    &Reference::Given(prox.clone()),
                )?;
                let gap = &y - &prox;
                let mut max_rel_dev: f64 = 0.0;
                let mut points = Vec::with_capacity(self.k_max);
                for (k, x) in trace.iterates.iter().enumerate().skip(1) {
                    let predicted = &gap / (k as f64 + 1.0);
                    let err_vec = x - &prox;
                    let rel_dev = (&err_vec - &predicted).norm() / predicted.norm();
                    if k <= self.check_k_max {
                        max_rel_dev = max_rel_dev.max(rel_dev);
                    }
                    let err = err_vec.norm();
                    points.push((k, err));
                    csv.row([
                        d.to_string(),
                        f(tau),
                        k.to_string(),
                        f(err),
                        f(predicted.norm()),
                        f(rel_dev),
                    ]);
                }
                let tag = format!("d={d},tau={tau}");
                out.check(
                    &format!("exact_rate[{tag}]"),
                    max_rel_dev <= self.tolerance,
                    format!("max relative deviation {max_rel_dev:.3e} for k <= {} (tolerance {:.0e})", self.check_k_max, self.tolerance),
                );
                let fit_points: Vec<_> = points.into_iter().filter(|(k, _)| *k >= self.slope_k_min).collect();
                let slope = fit_rate(&fit_points)?.slope;
                out.check(
                    &format!("rate_slope[{tag}]"),
                    (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&slope),
                    format!(
                        "log-log slope {slope:.4} over k in [{}, {}], accepted [{}, {}]",
                        self.slope_k_min, self.k_max, SLOPE_RANGE.0, SLOPE_RANGE.1
                    ),
                );
                records.push(RunRecord {
                    d,
                    tau,
                    eigenvalues,
                    y: y.iter().copied().collect(),
                    prox: prox.iter().copied().collect(),
                    max_rel_dev,
                    slope,
                });
            }
        }
        out.file("gaussian_exact_rate.csv", csv.finish());
        out.json("gaussian_exact_rate.json", &records);
        Ok(())
    }
}
