//! Experiment runner for `tweedie-prox`: a registry of named experiments driven by flat
//! `key = value` configs, each writing CSV/JSON artifacts and a digest manifest.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod priors;
pub mod registry;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Params};
pub use error::{CliError, Result};
pub use output::{Outputs, RunSummary};
pub use registry::{Experiment, KeySpec, Plan, REGISTRY};

/// Environment variable consulted when neither `--out` nor `output_dir` is set.
pub const OUT_DIR_ENV: &str = "PROX_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "prox-out";

/// Parses, checks keys and builds every problem object without running anything.
pub fn validate(config: &ExperimentConfig) -> Result<Box<dyn Plan>> {
    let experiment = config.experiment()?;
    config.check_keys(experiment)?;
    config.seed()?;
    config.output_dir()?;
    (experiment.plan)(&config.params())
}

/// `--out`, then `output_dir`, then `$PROX_OUT_DIR`, then `./prox-out`.
pub fn resolve_output_dir(config: &ExperimentConfig, cli_out: Option<&Path>) -> Result<PathBuf> {
    if let Some(dir) = cli_out {
        return Ok(dir.to_path_buf());
    }
    if let Some(dir) = config.output_dir()? {
        return Ok(dir);
    }
    Ok(std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)))
}

/// Runs the experiment in memory without writing anything.
pub fn execute(config: &ExperimentConfig) -> Result<Outputs> {
    let plan = validate(config)?;
    let mut outputs = Outputs::new();
    plan.execute(&mut outputs)?;
    Ok(outputs)
}

/// Runs the experiment and writes its artifacts and manifest into `dir`.
///
/// Failed bound checks are recorded in the manifest; use
/// [`RunSummary::into_result`] to turn them into an error.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    let outputs = execute(config)?;
    output::write_outputs(dir, config.experiment_name()?, config.seed()?, config.to_json(), outputs)
}
