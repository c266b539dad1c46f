//! Proximal operators of log-concave priors through MMSE averaging.
//!
//! The recursion `x_{k+1} = α_k MMSE_{σ_k}(x_k) + (1 - α_k) y` started at `x_0 = y`
//! converges to `prox_{-τ ln p}(y)` at rate `Õ(1/k)`. The crate provides priors with
//! exact or quadrature access to their Gaussian-smoothed family ([`prior`]), the
//! recursion and reference minimisers ([`prox`]), approximate proximal gradient
//! descent for MAP estimation ([`map`]) and numerical checks of the identities
//! behind the convergence proofs ([`analysis`]).

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod map;
pub mod prior;
pub mod prox;
pub mod trace;

pub use analysis::{CheckReport, PathState, RateReport};
pub use error::{Error, Result};
pub use linalg::{Matrix, Tensor3, Vector};
pub use prior::{EmbeddedSubspacePrior, GaussianPrior, Potential, PriorModel, PriorSpec, QuadraturePrior1D};
pub use prox::{ProxProblem, ProxSolution, Reference, Schedule, StepForm};
pub use trace::{CsvRecord, IterateTrace, TraceMeta};
