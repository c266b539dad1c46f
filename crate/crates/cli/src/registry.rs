use serde::Serialize;

use crate::config::Params;
use crate::error::Result;
use crate::experiments;
use crate::output::Outputs;

/// A documented config key. Every experiment key is optional; `default` is shown by `list`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KeySpec {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

impl KeySpec {
    pub const fn new(name: &'static str, default: &'static str, doc: &'static str) -> Self {
        Self { name, default, doc }
    }
}

/// A validated experiment ready to run.
pub trait Plan: Send {
    fn execute(&self, out: &mut Outputs) -> Result<()>;
}

pub type Planner = fn(&Params) -> Result<Box<dyn Plan>>;

#[derive(Serialize)]
pub struct Experiment {
    pub name: &'static str,
    pub description: &'static str,
    /// The claim the experiment reproduces.
    pub claim: &'static str,
    pub keys: &'static [KeySpec],
    #[serde(skip)]
    pub plan: Planner,
}

/// The registry, in alphabetical order.
pub static REGISTRY: [Experiment; 8] = [
    experiments::alg1_map::EXPERIMENT,
    experiments::cold_diffusion::EXPERIMENT,
    experiments::fig1::EXPERIMENT,
    experiments::fig2::EXPERIMENT,
    experiments::gaussian_rate::EXPERIMENT,
    experiments::path_ode::EXPERIMENT,
    experiments::pde_suite::EXPERIMENT,
    experiments::theorem1::EXPERIMENT,
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    REGISTRY.iter().find(|e| e.name == name)
}

/// Entries whose name contains `filter`.
pub fn list(filter: Option<&str>) -> Vec<&'static Experiment> {
    REGISTRY
        .iter()
        .filter(|e| filter.is_none_or(|f| e.name.contains(f)))
        .collect()
}

pub fn list_text(filter: Option<&str>) -> String {
    let entries = list(filter);
    let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
    entries
        .iter()
        .map(|e| format!("{:width$}  {} [{}]\n", e.name, e.description, e.claim))
        .collect()
}

pub fn list_json(filter: Option<&str>) -> String {
    serde_json::to_string_pretty(&list(filter)).expect("registry serialises")
}
