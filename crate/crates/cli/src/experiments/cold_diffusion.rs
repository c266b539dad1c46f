use tweedie_prox::prox::{exact_prox, run_prox_iteration, REFERENCE_TOL};
use tweedie_prox::{ProxProblem, Reference, Schedule, StepForm, Vector};

use super::{f, Csv};
use crate::config::Params;
use crate::error::{invalid, Result};
use crate::output::Outputs;
use crate::priors::{self, prior_spec, PRIOR_KEYS};
use crate::registry::{Experiment, KeySpec, Plan};

pub const EXPERIMENT: Experiment = Experiment {
    name: "cold-diffusion-schedule",
    description: "Error of the default schedule next to the heuristic weights alpha_k = k/N (diagnostics only)",
    claim: "the cold-diffusion weighting is a different schedule, outside the convergence guarantee",
    keys: &KEYS,
    plan,
};

const OWN_KEYS: [KeySpec; 3] = [
    KeySpec::new("y", "[3, ..., 3]", "anchor point"),
    KeySpec::new("tau", "1", "regularisation weight"),
    KeySpec::new("n_steps", "100", "N, the length of both runs"),
];

const KEYS: [KeySpec; 14] = {
    let mut keys = [KeySpec::new("", "", ""); 14];
    let mut i = 0;
    while i < OWN_KEYS.len() {
        keys[i] = OWN_KEYS[i];
        i += 1;
    }
    let mut j = 0;
    while j < PRIOR_KEYS.len() {
        keys[i + j] = PRIOR_KEYS[j];
        j += 1;
    }
    keys
};

struct ColdDiffusion {
    problem: ProxProblem,
    tau: f64,
    n_steps: usize,
}

fn plan(params: &Params) -> Result<Box<dyn Plan>> {
    let prior = priors::build(&prior_spec(params, "sech")?)?;
    let d = prior.dimension();
    let y = if params.contains("y") {
        params.vector("y", &[])?
    } else {
        Vector::from_element(d, 3.0)
    };
    let tau = params.f64("tau", 1.0)?;
    if !(tau > 0.0) {
        return Err(params.violation("tau", "tau must be positive"));
    }
    let n_steps = params.usize("n_steps", 100)?;
    if n_steps < 2 {
        return Err(params.violation("n_steps", "n_steps must be at least 2"));
    }
    let problem = ProxProblem::new(y, tau, prior).map_err(invalid)?;
    Ok(Box::new(ColdDiffusion { problem, tau, n_steps }))
}

impl Plan for ColdDiffusion {
    fn execute(&self, out: &mut Outputs) -> Result<()> {
        let prox = exact_prox(&self.problem, REFERENCE_TOL)?.point;
        let reference = Reference::Given(prox);
        let default = run_prox_iteration(
            &self.problem,
            &Schedule::paper_default(self.tau)?,
            self.n_steps,
            StepForm::Averaging,
            &reference,
        )?;
        let cold = run_prox_iteration(
            &self.problem,
            &Schedule::cold_diffusion(self.tau, self.n_steps)?,
            self.n_steps,
            StepForm::Averaging,
            &reference,
        )?;
        let mut csv = Csv::new("k,err_paper_default,err_cold_diffusion");
        let err = |rows: &[tweedie_prox::prox::ProxStep], i: usize| rows.get(i).and_then(|r| r.err).unwrap_or(f64::NAN);
        for i in 0..self.n_steps {
            csv.row([(i + 1).to_string(), f(err(&default.steps, i)), f(err(&cold.steps, i))]);
        }
        let last = self.n_steps - 1;
        out.note("final_err_default", err(&default.steps, last));
        out.note("final_err_cold_diffusion", err(&cold.steps, last));
        out.note("status", "diagnostic comparison; no bound is asserted for the cold-diffusion weights");
        out.file("cold_diffusion.csv", csv.finish());
        Ok(())
    }
}
