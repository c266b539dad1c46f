use std::sync::Arc;

use tweedie_prox::analysis::rate_slope;
use tweedie_prox::prox::{exact_prox, naive_gd, run_prox_iteration, REFERENCE_TOL};
use tweedie_prox::{GaussianPrior, IterateTrace, ProxProblem, Reference, Schedule, StepForm, Vector};

use super::{coord_header, coords, positive, Csv};
use crate::config::Params;
use crate::error::{invalid, Result};
use crate::output::Outputs;
use crate::registry::{Experiment, KeySpec, Plan};

pub const EXPERIMENT: Experiment = Experiment {
    name: "fig2-comparison",
    description: "Naive gradient descent on F vs gradient descent on the smoothed objectives (kappa_F = 500)",
    claim: "naive GD stagnates on the ill-conditioned objective while smoothed GD converges at O(1/k)",
    keys: &KEYS,
    plan,
};

const KEYS: [KeySpec; 7] = [
    KeySpec::new("tau", "1", "regularisation weight"),
    KeySpec::new("L", "999", "inverse variance of the second prior coordinate"),
    KeySpec::new("y", "[3, 3]", "anchor point"),
    KeySpec::new("step_factor", "0.8", "naive step size as a multiple of 1/L_F"),
    KeySpec::new("naive_steps", "100", "naive gradient descent iterations"),
    KeySpec::new("smoothed_steps", "10000", "smoothed gradient descent iterations"),
    KeySpec::new("smoothed_slope_k_min", "100", "start of the smoothed rate fit"),
];

pub const NAIVE_SLOPE_MIN: f64 = -0.05;
pub const NAIVE_SLOPE_RANGE: (usize, usize) = (10, 100);
pub const ERROR_RATIO_MIN: f64 = 10.0;
pub const SMOOTHED_SLOPE_RANGE: (f64, f64) = (-1.15, -0.85);

struct Fig2 {
    problem: ProxProblem,
    tau: f64,
    l: f64,
    step_factor: f64,
    naive_steps: usize,
    smoothed_steps: usize,
    smoothed_slope_k_min: usize,
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
    let step_factor = params.f64("step_factor", 0.8)?;
    if !(step_factor > 0.0 && step_factor < 2.0) {
        return Err(params.violation("step_factor", "step factor must lie in (0, 2)"));
    }
    let naive_steps = params.usize("naive_steps", 100)?;
    if naive_steps < NAIVE_SLOPE_RANGE.1 {
        return Err(params.violation("naive_steps", "need at least 100 naive steps"));
    }
    let smoothed_steps = params.usize("smoothed_steps", 10_000)?;
    let smoothed_slope_k_min = params.usize("smoothed_slope_k_min", 100)?;
    if smoothed_slope_k_min < 10 || smoothed_steps < (smoothed_slope_k_min + 9).max(naive_steps) {
        return Err(params.violation(
            "smoothed_steps",
            "need smoothed_slope_k_min >= 10 and smoothed_steps >= max(naive_steps, smoothed_slope_k_min + 9)",
        ));
    }
    let prior = GaussianPrior::diagonal(Vector::zeros(2), &[1.0, 1.0 / l]).map_err(invalid)?;
    let problem = ProxProblem::new(y, tau, Arc::new(prior)).map_err(invalid)?;
    Ok(Box::new(Fig2 {
        problem,
        tau,
        l,
        step_factor,
        naive_steps,
        smoothed_steps,
        smoothed_slope_k_min,
    }))
}

fn trajectory<R>(trace: &IterateTrace<R>) -> String {
    let mut csv = Csv::new(&format!("k,{}", coord_header(2)));
    for (k, x) in trace.iterates.iter().enumerate() {
        csv.row(std::iter::once(k.to_string()).chain(coords(x)));
    }
    csv.finish()
}

impl Plan for Fig2 {
    fn execute(&self, out: &mut Outputs) -> Result<()> {
        let l_f = 1.0 + self.tau * self.l;
        let kappa = l_f / (1.0 + self.tau);
        let gamma = self.step_factor / l_f;
        let prox = exact_prox(&self.problem, REFERENCE_TOL)?.point;
        let reference = Reference::Given(prox);
        let naive = naive_gd(&self.problem, gamma, self.naive_steps, &reference)?;
        let smoothed = run_prox_iteration(
            &self.problem,
            &Schedule::paper_default(self.tau)?,
            self.smoothed_steps,
            StepForm::Gradient,
            &reference,
        )?;

        let naive_slope = rate_slope(&naive, NAIVE_SLOPE_RANGE.0, NAIVE_SLOPE_RANGE.1)?.slope;
        out.check(
            "naive_stagnation_slope",
            naive_slope >= NAIVE_SLOPE_MIN,
            format!(
                "naive GD log-log slope {naive_slope:.4} over k in [{}, {}], required >= {NAIVE_SLOPE_MIN}",
                NAIVE_SLOPE_RANGE.0, NAIVE_SLOPE_RANGE.1
            ),
        );
        let k = NAIVE_SLOPE_RANGE.1;
        let naive_err = naive.steps[k - 1].err.unwrap_or(f64::NAN);
        let smoothed_err = smoothed.steps[k - 1].err.unwrap_or(f64::NAN);
        let ratio = naive_err / smoothed_err;
        out.check(
            "error_ratio_at_100",
            ratio >= ERROR_RATIO_MIN,
            format!("naive error {naive_err:.4e} / smoothed error {smoothed_err:.4e} = {ratio:.2} at k = {k}, required >= {ERROR_RATIO_MIN}"),
        );
        let smoothed_slope = rate_slope(&smoothed, self.smoothed_slope_k_min, self.smoothed_steps)?.slope;
        out.check(
            "smoothed_rate_slope",
            (SMOOTHED_SLOPE_RANGE.0..=SMOOTHED_SLOPE_RANGE.1).contains(&smoothed_slope),
            format!(
                "smoothed GD log-log slope {smoothed_slope:.4} over k in [{}, {}], accepted [{}, {}]",
                self.smoothed_slope_k_min, self.smoothed_steps, SMOOTHED_SLOPE_RANGE.0, SMOOTHED_SLOPE_RANGE.1
            ),
        );

        out.note("tau", self.tau);
        out.note("L", self.l);
        out.note("L_F", l_f);
        out.note("kappa_F", kappa);
        out.note("naive_step_size", gamma);
        out.note(
            "instance",
            "tau and L are not given for the original figure; tau = 1, L = 999 realise kappa_F = 500",
        );
        out.file("fig2_trajectory_naive.csv", trajectory(&naive));
        out.file("fig2_trajectory_smoothed.csv", trajectory(&smoothed));
        out.file("fig2_error_naive.csv", naive.to_csv_string());
        out.file("fig2_error_smoothed.csv", smoothed.to_csv_string());
        Ok(())
    }
}
