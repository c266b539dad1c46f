use serde::Serialize;

use crate::error::{Error, Result};

/// Weights `α_k`, noise variances `σ_k²` and step sizes `γ_k` of the recursion.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `σ_k² = τ/(k+1)`, `γ_k = 1/(k+2) = 1/L_σₖ` and MMSE weight `α_k = (k+1)/(k+2)`,
    /// the weight that makes the averaging step coincide with the gradient step.
    PaperDefault { tau: f64 },
    /// Arbitrary finite sequences; not covered by the convergence guarantee.
    Custom {
        alpha: Vec<f64>,
        sigma_sq: Vec<f64>,
        gamma: Vec<f64>,
    },
}

impl Schedule {
    pub fn paper_default(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidProblem(format!("tau must be positive, got {tau}")));
        }
        Ok(Schedule::PaperDefault { tau })
    }

    pub fn custom(alpha: Vec<f64>, sigma_sq: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if alpha.len() != sigma_sq.len() || alpha.len() != gamma.len() {
            return Err(Error::InvalidProblem("custom schedule sequences differ in length".into()));
        }
        let all = alpha.iter().chain(&sigma_sq).chain(&gamma);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("custom schedule"));
        }
        if sigma_sq.iter().chain(&gamma).any(|&v| v < 0.0) {
            return Err(Error::InvalidProblem("custom schedule has negative entries".into()));
        }
        Ok(Schedule::Custom { alpha, sigma_sq, gamma })
    }

    /// Cold-diffusion weights `α_k = k/N` with the default noise levels over `N` steps;
    /// `γ_k = 1 - α_k` so the two step forms still coincide.
    pub fn cold_diffusion(tau: f64, n: usize) -> Result<Self> {
        let n_f = n as f64;
        let alpha: Vec<f64> = (0..n).map(|k| k as f64 / n_f).collect();
        let sigma_sq = (0..n).map(|k| tau / (k as f64 + 1.0)).collect();
        let gamma = alpha.iter().map(|a| 1.0 - a).collect();
        Self::custom(alpha, sigma_sq, gamma)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Schedule::PaperDefault { .. } => "paper_default",
            Schedule::Custom { .. } => "custom",
        }
    }

    /// Number of available steps, `None` when unbounded.
    pub fn steps(&self) -> Option<usize> {
        match self {
            Schedule::PaperDefault { .. } => None,
            Schedule::Custom { alpha, .. } => Some(alpha.len()),
        }
    }

    fn entry(seq: &[f64], k: usize) -> Result<f64> {
        seq.get(k).copied().ok_or(Error::ScheduleExhausted(k))
    }

    pub fn alpha(&self, k: usize) -> Result<f64> {
        match self {
            Schedule::PaperDefault { .. } => Ok((k as f64 + 1.0) / (k as f64 + 2.0)),
            Schedule::Custom { alpha, .. } => Self::entry(alpha, k),
        }
    }

    pub fn sigma_sq(&self, k: usize) -> Result<f64> {
        match self {
            Schedule::PaperDefault { tau } => Ok(tau / (k as f64 + 1.0)),
            Schedule::Custom { sigma_sq, .. } => Self::entry(sigma_sq, k),
        }
    }

    pub fn gamma(&self, k: usize) -> Result<f64> {
        match self {
            Schedule::PaperDefault { .. } => Ok(1.0 / (k as f64 + 2.0)),
            Schedule::Custom { gamma, .. } => Self::entry(gamma, k),
        }
    }

    /// `L_σₖ = 1 + τ/σ_k² = k + 2` for the default schedule, in integers.
    pub fn smoothness(&self, k: usize) -> Option<u64> {
        match self {
            Schedule::PaperDefault { .. } => Some(k as u64 + 2),
            Schedule::Custom { .. } => None,
        }
    }
}
