//! Prior descriptions in flat configs and the named priors used by sweeps.

use std::sync::Arc;

use tweedie_prox::{Potential, PriorModel, PriorSpec};

use crate::config::Params;
use crate::error::{invalid, Result};
use crate::registry::KeySpec;

/// Names accepted by `prior` and in `priors` lists.
pub const PRIOR_NAMES: [&str; 6] = ["gaussian", "sech", "logistic", "quartic", "embedded", "embedded-sech"];

/// Priors with a finite certified third-derivative bound, used where a guarantee is checked.
pub const REGISTERED: [&str; 3] = ["gaussian", "sech", "embedded-sech"];

pub const PRIOR_KEYS: [KeySpec; 11] = [
    KeySpec::new("prior", "per experiment", "gaussian | sech | logistic | quartic | embedded | embedded-sech"),
    KeySpec::new("prior_mean", "[0, 0]", "gaussian mean"),
    KeySpec::new("prior_variances", "[1, 0.05]", "gaussian diagonal covariance"),
    KeySpec::new("prior_eigenvalues", "-", "gaussian covariance eigenvalues (with prior_eigenvectors)"),
    KeySpec::new("prior_eigenvectors", "-", "gaussian covariance eigenvectors, as a list of columns"),
    KeySpec::new("prior_lo", "potential default", "quadrature grid lower end"),
    KeySpec::new("prior_hi", "potential default", "quadrature grid upper end"),
    KeySpec::new("prior_points", "100 per unit length", "quadrature grid size"),
    KeySpec::new("prior_base", "\"sech\"", "embedded: potential of the one-dimensional base prior"),
    KeySpec::new("prior_basis", "[[2/3, -1/3, 2/3]]", "embedded: orthonormal basis columns"),
    KeySpec::new("prior_offset", "[0, 1, 0]", "embedded: a point of the subspace"),
];

const EMBEDDED_BASIS: [f64; 3] = [2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0];
const EMBEDDED_OFFSET: [f64; 3] = [0.0, 1.0, 0.0];

fn potential(params: &Params, key: &str, name: &str) -> Result<Potential> {
    Potential::from_name(name).ok_or_else(|| params.violation(key, &format!("unknown potential `{name}`")))
}

fn quadrature_spec(params: &Params, pot: Potential) -> Result<PriorSpec> {
    let PriorSpec::Quadrature1d { lo, hi, points, .. } = PriorSpec::quadrature(pot) else {
        unreachable!()
    };
    Ok(PriorSpec::Quadrature1d {
        potential: pot,
        lo: params.f64("prior_lo", lo)?,
        hi: params.f64("prior_hi", hi)?,
        points: params.usize("prior_points", points)?,
    })
}

/// Reads `prior` (defaulting to `default`) and its parameter keys.
pub fn prior_spec(params: &Params, default: &str) -> Result<PriorSpec> {
    let name = params.string("prior", default)?;
    match name.as_str() {
        "gaussian" => {
            let mean = params.f64_list("prior_mean", &[0.0, 0.0])?;
            if params.contains("prior_eigenvalues") || params.contains("prior_eigenvectors") {
                let eigenvalues = params.f64_list("prior_eigenvalues", &[])?;
                let eigenvectors = params.rows("prior_eigenvectors", &[])?;
                Ok(PriorSpec::Gaussian {
                    mean,
                    eigenvalues: Some(eigenvalues),
                    eigenvectors: Some(eigenvectors),
                    diagonal: None,
                })
            } else {
                let variances = params.f64_list("prior_variances", &[1.0, 0.05])?;
                Ok(PriorSpec::diagonal_gaussian(mean, variances))
            }
        }
        "embedded" | "embedded-sech" => {
            let base_name = params.string("prior_base", "sech")?;
            let base = quadrature_spec(params, potential(params, "prior_base", &base_name)?)?;
            Ok(PriorSpec::Embedded {
                base: Box::new(base),
                basis: params.rows("prior_basis", &[&EMBEDDED_BASIS])?,
                offset: params.f64_list("prior_offset", &EMBEDDED_OFFSET)?,
            })
        }
        other => match Potential::from_name(other) {
            Some(pot) => quadrature_spec(params, pot),
            None => Err(params.violation(
                "prior",
                &format!("unknown prior `{other}`; expected one of {}", PRIOR_NAMES.join(", ")),
            )),
        },
    }
}

/// A named prior with its default parameters.
pub fn named_spec(name: &str) -> Option<PriorSpec> {
    Some(match name {
        "gaussian" => PriorSpec::diagonal_gaussian(vec![0.0, 0.0], vec![1.0, 0.05]),
        "embedded" | "embedded-sech" => PriorSpec::Embedded {
            base: Box::new(PriorSpec::quadrature(Potential::Sech)),
            basis: vec![EMBEDDED_BASIS.to_vec()],
            offset: EMBEDDED_OFFSET.to_vec(),
        },
        other => PriorSpec::quadrature(Potential::from_name(other)?),
    })
}

/// Resolves a `priors` list of names.
pub fn named_priors(params: &Params, key: &str, names: &[String]) -> Result<Vec<(String, PriorSpec)>> {
    names
        .iter()
        .map(|n| {
            named_spec(n)
                .map(|s| (n.clone(), s))
                .ok_or_else(|| params.violation(key, &format!("unknown prior `{n}`")))
        })
        .collect()
}

pub fn build(spec: &PriorSpec) -> Result<Arc<dyn PriorModel>> {
    spec.build().map_err(invalid)
}
