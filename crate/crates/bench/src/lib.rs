//! Fixed problem instances shared by the benchmarks.

use std::sync::Arc;

use tweedie_prox::{Potential, PriorModel, PriorSpec, ProxProblem, Result, Vector};

/// The priors benchmarked, by name.
pub const PRIORS: [&str; 3] = ["gaussian", "sech", "embedded-sech"];

/// Builds one of [`PRIORS`]: a 10-dimensional diagonal Gaussian, the 1D sech
/// quadrature prior, or the sech prior embedded on a line in R^3.
pub fn prior(name: &str) -> Result<Arc<dyn PriorModel>> {
    let spec = match name {
        "gaussian" => PriorSpec::diagonal_gaussian(vec![0.0; 10], (1..=10).map(|i| 1.0 / i as f64).collect()),
        "sech" => PriorSpec::quadrature(Potential::Sech),
        "embedded-sech" => PriorSpec::Embedded {
            base: Box::new(PriorSpec::quadrature(Potential::Sech)),
            basis: vec![vec![1.0 / 3f64.sqrt(); 3]],
            offset: vec![0.5, -0.5, 0.0],
        },
        other => panic!("no benchmark prior named {other}"),
    };
    spec.build()
}

/// Prox problem with anchor `(2, -1, 2, -1, ...)` and `tau = 1`.
pub fn problem(name: &str) -> Result<ProxProblem> {
    let prior = prior(name)?;
    let y = Vector::from_fn(prior.dimension(), |i, _| if i % 2 == 0 { 2.0 } else { -1.0 });
    ProxProblem::new(y, 1.0, prior)
}
