use tweedie_prox::prox::{exact_prox, run_prox_iteration, ProxStep, REFERENCE_TOL};
use tweedie_prox::{IterateTrace, PriorSpec, ProxProblem, Reference, Schedule, StepForm, Vector};

use super::{f, parallel_map, positive, rng, seed, uniform_point, Csv};
use crate::config::Params;
use crate::error::{invalid, Result};
use crate::output::Outputs;
use crate::priors::{self, named_priors, REGISTERED};
use crate::registry::{Experiment, KeySpec, Plan};

pub const EXPERIMENT: Experiment = Experiment {
    name: "theorem1-sweep",
    description: "Error of MMSE averaging against the ((ln k) + 7)/(k + 1) bound on Gaussian, sech and embedded priors",
    claim: "non-asymptotic O~(1/k) convergence to the proximal point; averaging = smoothed gradient descent",
    keys: &KEYS,
    plan,
};

const KEYS: [KeySpec; 6] = [
    KeySpec::new("priors", "[\"gaussian\", \"sech\", \"embedded-sech\"]", "named priors to sweep"),
    KeySpec::new("tau", "1", "regularisation weight"),
    KeySpec::new("k_max", "10000", "iterations per run"),
    KeySpec::new("anchors", "3", "random anchor points per prior"),
    KeySpec::new("anchor_scale", "4", "anchors are uniform on [-scale, scale]^d"),
    KeySpec::new("equivalence_steps", "1000", "steps over which the averaging and gradient forms are compared"),
];

/// Relative agreement required between the two forms of the recursion.
pub const EQUIVALENCE_TOL: f64 = 1e-12;

struct Theorem1 {
    priors: Vec<(String, PriorSpec)>,
    tau: f64,
    k_max: usize,
    anchors: usize,
    anchor_scale: f64,
    equivalence_steps: usize,
    seed: u64,
}

fn plan(params: &Params) -> Result<Box<dyn Plan>> {
    let names = params.string_list("priors", &REGISTERED)?;
    if names.is_empty() {
        return Err(params.violation("priors", "at least one prior is required"));
    }
    if let Some(bad) = names.iter().find(|n| n.as_str() == "quartic") {
        return Err(params.violation(
            "priors",
            &format!("`{bad}` has no finite third-derivative bound, so the guarantee does not apply"),
        ));
    }
    let priors = named_priors(params, "priors", &names)?;
    for (_, spec) in &priors {
        priors::build(spec)?;
    }
    let tau = params.f64("tau", 1.0)?;
    if !(tau > 0.0) {
        return Err(params.violation("tau", "tau must be positive"));
    }
    let k_max = params.usize("k_max", 10_000)?;
    if k_max == 0 {
        return Err(params.violation("k_max", "k_max must be at least 1"));
    }
    let anchors = params.usize("anchors", 3)?;
    if anchors == 0 {
        return Err(params.violation("anchors", "at least one anchor is required"));
    }
    Ok(Box::new(Theorem1 {
        priors,
        tau,
        k_max,
        anchors,
        anchor_scale: positive(params, "anchor_scale", params.f64("anchor_scale", 4.0)?)?,
        equivalence_steps: params.usize("equivalence_steps", 1000)?,
        seed: seed(params)?,
    }))
}

struct Job {
    prior: usize,
    anchor: usize,
    y: Vector,
}

struct JobResult {
    trace: IterateTrace<ProxStep>,
    prox: Vector,
    worst_ratio: f64,
    violations: usize,
    equivalence: f64,
}

impl Theorem1 {
    fn run_job(&self, job: &Job) -> Result<JobResult> {
        let prior = priors::build(&self.priors[job.prior].1)?;
        let problem = ProxProblem::new(job.y.clone(), self.tau, prior).map_err(invalid)?;
        let prox = exact_prox(&problem, REFERENCE_TOL)?.point;
        let schedule = Schedule::paper_default(self.tau)?;
        let reference = Reference::Given(prox.clone());
        let trace = run_prox_iteration(&problem, &schedule, self.k_max, StepForm::Averaging, &reference)?;
        let mut worst_ratio: f64 = 0.0;
        let mut violations = 0;
        for row in &trace.steps {
            let (err, bound) = (row.err.unwrap_or(f64::NAN), row.bound.unwrap_or(f64::NAN));
            worst_ratio = worst_ratio.max(err / bound);
            if !(err <= bound) {
                violations += 1;
            }
        }
        let mut equivalence: f64 = 0.0;
        if self.equivalence_steps > 0 {
            let n = self.equivalence_steps;
            let averaging = if n <= self.k_max {
                None
            } else {
                Some(run_prox_iteration(&problem, &schedule, n, StepForm::Averaging, &Reference::None)?)
            };
            let averaging = averaging.as_ref().map_or(&trace.iterates[..=n], |t| &t.iterates[..]);
            let gradient = run_prox_iteration(&problem, &schedule, n, StepForm::Gradient, &Reference::None)?;
            for (a, g) in averaging.iter().zip(&gradient.iterates) {
                let scale = a.norm().max(job.y.norm());
                equivalence = equivalence.max((a - g).norm() / scale);
            }
        }
        Ok(JobResult {
            trace,
            prox,
            worst_ratio,
            violations,
            equivalence,
        })
    }
}

impl Plan for Theorem1 {
    fn execute(&self, out: &mut Outputs) -> Result<()> {
        let mut jobs = Vec::new();
        for (p, (_, spec)) in self.priors.iter().enumerate() {
            let dim = priors::build(spec)?.dimension();
            let mut rng = rng(self.seed, p as u64);
            for a in 0..self.anchors {
                jobs.push(Job {
                    prior: p,
                    anchor: a,
                    y: uniform_point(&mut rng, dim, self.anchor_scale),
                });
            }
        }
        let results = parallel_map(&jobs, |job| self.run_job(job));
        let mut summary = Csv::new("prior,anchor,y_norm,prox_gap,final_err,worst_err_over_bound,violations,equivalence_dev");
        let mut per_prior = vec![(0usize, 0.0f64, 0.0f64); self.priors.len()];
        for (job, result) in jobs.iter().zip(results) {
            let r = result?;
            let name = &self.priors[job.prior].0;
            out.file(&format!("theorem1_{name}_{}.csv", job.anchor), r.trace.to_csv_string());
            summary.row([
                name.clone(),
                job.anchor.to_string(),
                f(job.y.norm()),
                f((&job.y - &r.prox).norm()),
                f(r.trace.steps.last().and_then(|s| s.err).unwrap_or(f64::NAN)),
                f(r.worst_ratio),
                r.violations.to_string(),
                f(r.equivalence),
            ]);
            let agg = &mut per_prior[job.prior];
            agg.0 += r.violations + usize::from(r.trace.is_truncated());
            agg.1 = agg.1.max(r.worst_ratio);
            agg.2 = agg.2.max(r.equivalence);
        }
        for ((name, _), (violations, worst, equivalence)) in self.priors.iter().zip(per_prior) {
            out.check(
                &format!("theorem1_bound[{name}]"),
                violations == 0,
                format!(
                    "{violations} violations for k in [1, {}] over {} anchors; max err/bound {worst:.4}",
                    self.k_max, self.anchors
                ),
            );
            if self.equivalence_steps > 0 {
                out.check(
                    &format!("averaging_gradient_equivalence[{name}]"),
                    equivalence <= EQUIVALENCE_TOL,
                    format!(
                        "max |x_avg - x_grad| / max(|x_avg|, |y|) = {equivalence:.3e} over {} steps (tolerance {EQUIVALENCE_TOL:.0e})",
                        self.equivalence_steps
                    ),
                );
            }
        }
        out.file("theorem1_summary.csv", summary.finish());
        Ok(())
    }
}
