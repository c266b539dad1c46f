use std::sync::Arc;

use tweedie_prox::analysis::{heat_equation_residual, max_principle_report, score_pde_residual};
use tweedie_prox::linalg::min_max_eigenvalue;
use tweedie_prox::{Matrix, Potential, PriorModel, ProxProblem, Vector};

use super::{f, positive, rng, seed, uniform_point, Csv};
use crate::config::Params;
use crate::error::{invalid, Result};
use crate::output::Outputs;
use crate::priors::{self, named_spec};
use crate::registry::{Experiment, KeySpec, Plan};

pub const EXPERIMENT: Experiment = Experiment {
    name: "pde-suite",
    description: "Heat equations, first- and second-order Tweedie, Hessian conditioning and the third-derivative maximum principle",
    claim: "ln p_sigma solves a heat-type PDE, its derivatives are posterior moments, and ||grad Laplacian|| stays below sqrt(r) M",
    keys: &KEYS,
    plan,
};

const KEYS: [KeySpec; 6] = [
    KeySpec::new("tau", "1", "regularisation weight for the conditioning check"),
    KeySpec::new("heat_sigma_sq", "[0.1, 0.5, 1]", "noise levels of the heat-equation checks"),
    KeySpec::new("heat_points", "101", "grid points on [-4, 4] for the heat-equation checks"),
    KeySpec::new("tweedie_sigma", "[0.1, 0.5, 1]", "noise standard deviations of the Tweedie checks"),
    KeySpec::new("probes", "20", "random points per noise level"),
    KeySpec::new("max_principle_sigma_sq", "[0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1]", "noise levels of the maximum principle"),
];

pub const HEAT_TOL_QUADRATURE: f64 = 1e-4;
pub const HEAT_TOL_GAUSSIAN: f64 = 1e-8;
pub const TWEEDIE_TOL: f64 = 1e-6;
pub const EIGEN_SLACK: f64 = 1e-9;
pub const SCORE_PDE_TOL: f64 = 1e-5;
const SCORE_PDE_STEP: f64 = 1e-5;
/// Half-width of the oracle's integration window in units of sigma.
const ORACLE_WINDOW: f64 = 12.0;
const ORACLE_INTERVALS: usize = 4000;
const PROBE_HALF_WIDTH: f64 = 4.0;

/// Prior name, prior, evaluation points and residual tolerance of one heat-equation case.
type HeatCase<'a> = (&'a str, Arc<dyn PriorModel>, &'a [Vector], f64);

struct PdeSuite {
    tau: f64,
    heat_sigma_sq: Vec<f64>,
    heat_points: usize,
    tweedie_sigma: Vec<f64>,
    probes: usize,
    max_principle_sigma_sq: Vec<f64>,
    seed: u64,
}

fn positive_list(params: &Params, key: &str, default: &[f64]) -> Result<Vec<f64>> {
    let v = params.f64_list(key, default)?;
    if v.is_empty() || v.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(params.violation(key, "expected a nonempty list of positive values"));
    }
    Ok(v)
}

fn plan(params: &Params) -> Result<Box<dyn Plan>> {
    let heat_sigma_sq = positive_list(params, "heat_sigma_sq", &[0.1, 0.5, 1.0])?;
    if heat_sigma_sq.iter().any(|s| *s < 2e-3) {
        return Err(params.violation("heat_sigma_sq", "the finite difference in sigma^2 needs sigma^2 >= 2e-3"));
    }
    let heat_points = params.usize("heat_points", 101)?;
    if heat_points < 2 {
        return Err(params.violation("heat_points", "need at least 2 points"));
    }
    let probes = params.usize("probes", 20)?;
    if probes == 0 {
        return Err(params.violation("probes", "need at least one probe"));
    }
    Ok(Box::new(PdeSuite {
        tau: positive(params, "tau", params.f64("tau", 1.0)?)?,
        heat_sigma_sq,
        heat_points,
        tweedie_sigma: positive_list(params, "tweedie_sigma", &[0.1, 0.5, 1.0])?,
        probes,
        max_principle_sigma_sq: positive_list(
            params,
            "max_principle_sigma_sq",
            &[0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
        )?,
        seed: seed(params)?,
    }))
}

fn named(name: &str) -> Result<Arc<dyn PriorModel>> {
    priors::build(&named_spec(name).expect("registered prior name"))
}

/// Posterior mean and variance of `X` given `X + sigma eps = z` for the density `exp(-V)`,
/// by composite Simpson over `z +/- 12 sigma` in log-sum-exp form.
pub fn posterior_mean_variance(potential: Potential, sigma_sq: f64, z: f64) -> (f64, f64) {
    let sigma = sigma_sq.sqrt();
    let (a, b) = (z - ORACLE_WINDOW * sigma, z + ORACLE_WINDOW * sigma);
    let n = ORACLE_INTERVALS;
    let h = (b - a) / n as f64;
    let nodes: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let x = a + i as f64 * h;
            let w: f64 = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (x, w.ln() - potential.value(x) - (x - z).powi(2) / (2.0 * sigma_sq))
        })
        .collect();
    let top = nodes.iter().map(|n| n.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut s0, mut s1) = (0.0, 0.0);
    for &(x, l) in &nodes {
        let w = (l - top).exp();
        s0 += w;
        s1 += w * x;
    }
    let mean = s1 / s0;
    let s2: f64 = nodes.iter().map(|&(x, l)| (l - top).exp() * (x - mean).powi(2)).sum();
    (mean, s2 / s0)
}

struct Row {
    check: &'static str,
    prior: String,
    sigma_sq: f64,
    value: f64,
    tolerance: f64,
}

impl PdeSuite {
    fn heat(&self, out: &mut Outputs, csv: &mut Csv) -> Result<()> {
        let n = self.heat_points;
        let line: Vec<Vector> = (0..n)
            .map(|i| Vector::from_element(1, -4.0 + 8.0 * i as f64 / (n - 1) as f64))
            .collect();
        let gaussian = named("gaussian")?;
        let mut rng = rng(self.seed, 0);
        let plane: Vec<Vector> = (0..n).map(|_| uniform_point(&mut rng, gaussian.dimension(), 4.0)).collect();
        let cases: [HeatCase; 3] = [
            ("sech", named("sech")?, &line, HEAT_TOL_QUADRATURE),
            ("logistic", named("logistic")?, &line, HEAT_TOL_QUADRATURE),
            ("gaussian", gaussian, &plane, HEAT_TOL_GAUSSIAN),
        ];
        for (name, prior, grid, tol) in cases {
            let mut worst: f64 = 0.0;
            let mut score_worst: f64 = 0.0;
            for &s2 in &self.heat_sigma_sq {
                let r = heat_equation_residual(prior.as_ref(), s2, grid)?;
                let q = score_pde_residual(prior.as_ref(), s2, grid, SCORE_PDE_STEP)?;
                csv.row([name.to_string(), f(s2), f(r), f(q)]);
                worst = worst.max(r);
                score_worst = score_worst.max(q);
            }
            out.check(
                &format!("heat_equation[{name}]"),
                worst <= tol,
                format!("max |d/ds ln p - (Laplacian + |score|^2)/2| = {worst:.3e} (tolerance {tol:.0e})"),
            );
            out.check(
                &format!("score_pde[{name}]"),
                score_worst <= SCORE_PDE_TOL,
                format!("max score-PDE residual = {score_worst:.3e} (tolerance {SCORE_PDE_TOL:.0e})"),
            );
        }
        Ok(())
    }

    fn tweedie(&self, out: &mut Outputs, csv: &mut Csv) -> Result<()> {
        for (stream, pot) in [Potential::Sech, Potential::Logistic].into_iter().enumerate() {
            let name = pot.name();
            let prior = named(name)?;
            let mut rng = rng(self.seed, 1 + stream as u64);
            let (mut first, mut second): (f64, f64) = (0.0, 0.0);
            for &sigma in &self.tweedie_sigma {
                let s2 = sigma * sigma;
                for _ in 0..self.probes {
                    let z = uniform_point(&mut rng, 1, PROBE_HALF_WIDTH);
                    let (mean, var) = posterior_mean_variance(pot, s2, z[0]);
                    let mmse = prior.mmse(s2, &z)?[0];
                    let neg_hessian = -prior.hessian_smoothed(s2, &z)?[(0, 0)];
                    let predicted = (1.0 - var / s2) / s2;
                    let e1 = (mmse - mean).abs();
                    let e2 = (neg_hessian - predicted).abs();
                    csv.row([name.to_string(), f(s2), f(z[0]), f(mmse), f(mean), f(neg_hessian), f(predicted)]);
                    first = first.max(e1);
                    second = second.max(e2);
                }
            }
            out.check(
                &format!("tweedie[{name}]"),
                first <= TWEEDIE_TOL,
                format!("max |MMSE - posterior mean| = {first:.3e} (tolerance {TWEEDIE_TOL:.0e})"),
            );
            out.check(
                &format!("second_order_tweedie[{name}]"),
                second <= TWEEDIE_TOL,
                format!("max |-H - (1 - Var/s)/s| = {second:.3e} (tolerance {TWEEDIE_TOL:.0e})"),
            );
        }
        Ok(())
    }

    fn conditioning(&self, out: &mut Outputs, csv: &mut Csv) -> Result<Vec<Row>> {
        let tau = self.tau;
        let mut rows = Vec::new();
        for (stream, name) in ["gaussian", "sech", "logistic", "embedded-sech"].into_iter().enumerate() {
            let prior = named(name)?;
            let d = prior.dimension();
            let mut rng = rng(self.seed, 10 + stream as u64);
            let mut low: f64 = f64::INFINITY;
            let mut high_excess: f64 = f64::NEG_INFINITY;
            let mut kappa_at_tau: f64 = 0.0;
            for s2 in [tau, tau / 2.0, tau / 10.0] {
                let problem = ProxProblem::new(Vector::zeros(d), tau, prior.clone()).map_err(invalid)?;
                for _ in 0..self.probes {
                    let x = uniform_point(&mut rng, d, PROBE_HALF_WIDTH);
                    let hess: Matrix = problem.smoothed_hessian(s2, &x)?;
                    let (lo, hi) = min_max_eigenvalue(&hess);
                    csv.row([name.to_string(), f(s2), f(lo), f(hi), f(1.0 + tau / s2)]);
                    low = low.min(lo);
                    high_excess = high_excess.max(hi - (1.0 + tau / s2));
                    if s2 == tau {
                        kappa_at_tau = kappa_at_tau.max(hi / lo);
                    }
                }
            }
            out.check(
                &format!("hessian_spectrum[{name}]"),
                low >= 1.0 - EIGEN_SLACK && high_excess <= EIGEN_SLACK,
                format!("smallest eigenvalue {low:.12}, largest minus (1 + tau/s) {high_excess:.3e}"),
            );
            out.check(
                &format!("condition_at_tau[{name}]"),
                kappa_at_tau <= 2.0 + EIGEN_SLACK,
                format!("max condition number at sigma^2 = tau: {kappa_at_tau:.12}"),
            );
            rows.push(Row {
                check: "condition_at_tau",
                prior: name.to_string(),
                sigma_sq: tau,
                value: kappa_at_tau,
                tolerance: 2.0 + EIGEN_SLACK,
            });
        }
        Ok(rows)
    }

    fn max_principle(&self, out: &mut Outputs, csv: &mut Csv) -> Result<()> {
        for name in ["sech", "embedded-sech"] {
            let prior = named(name)?;
            let (report, suprema) = max_principle_report(prior.as_ref(), &self.max_principle_sigma_sq)?;
            let bound = (prior.effective_dimension() as f64).sqrt() * prior.third_derivative_bound();
            for (s2, sup) in self.max_principle_sigma_sq.iter().zip(&suprema) {
                csv.row([name.to_string(), f(*s2), f(*sup), f(bound)]);
            }
            out.check(
                &format!("max_principle[{name}]"),
                report.passed,
                format!(
                    "max sup |grad Laplacian ln p_s| = {:.6} vs sqrt(r) M = {bound:.6} (slack 1e-3)",
                    suprema.iter().copied().fold(0.0, f64::max)
                ),
            );
        }
        Ok(())
    }
}

impl Plan for PdeSuite {
    fn execute(&self, out: &mut Outputs) -> Result<()> {
        let mut heat = Csv::new("prior,sigma_sq,heat_residual,score_pde_residual");
        self.heat(out, &mut heat)?;
        let mut tweedie = Csv::new("prior,sigma_sq,z,mmse,posterior_mean,neg_hessian,predicted");
        self.tweedie(out, &mut tweedie)?;
        let mut conditioning = Csv::new("prior,sigma_sq,eig_min,eig_max,upper_bound");
        let summary = self.conditioning(out, &mut conditioning)?;
        let mut max_principle = Csv::new("prior,sigma_sq,supremum,bound");
        self.max_principle(out, &mut max_principle)?;

        let mut kappa = Csv::new("check,prior,sigma_sq,value,tolerance");
        for r in summary {
            kappa.row([r.check.to_string(), r.prior, f(r.sigma_sq), f(r.value), f(r.tolerance)]);
        }
        out.file("pde_heat.csv", heat.finish());
        out.file("pde_tweedie.csv", tweedie.finish());
        out.file("pde_conditioning.csv", conditioning.finish());
        out.file("pde_condition_numbers.csv", kappa.finish());
        out.file("pde_max_principle.csv", max_principle.finish());
        Ok(())
    }
}
