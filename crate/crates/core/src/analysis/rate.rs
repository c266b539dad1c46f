use serde::Serialize;

use crate::error::{Error, Result};
use crate::prox::{GdStep, ProxStep};
use crate::trace::IterateTrace;

/// Errors below this are treated as exact convergence and left out of fits.
pub const ERROR_FLOOR: f64 = 100.0 * f64::EPSILON;
const MIN_POINTS: usize = 10;

/// A trace row carrying an error to a reference point.
pub trait ErrorRow {
    fn index(&self) -> usize;
    fn error(&self) -> Option<f64>;
}

impl ErrorRow for ProxStep {
    fn index(&self) -> usize {
        self.k
    }
    fn error(&self) -> Option<f64> {
        self.err
    }
}

impl ErrorRow for GdStep {
    fn index(&self) -> usize {
        self.k
    }
    fn error(&self) -> Option<f64> {
        self.err
    }
}

/// Least-squares fit `ln err ≈ intercept + slope · ln k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub slope: f64,
    pub intercept: f64,
    pub k_range: (usize, usize),
    pub points: usize,
    /// `(k, ln err - fitted)` per point used.
    pub residuals: Vec<(usize, f64)>,
}

/// Fits over `k ∈ [k_min, k_max]`; requires `k_min ≥ 10`.
pub fn rate_slope<R: ErrorRow>(trace: &IterateTrace<R>, k_min: usize, k_max: usize) -> Result<RateReport> {
    if k_min < 10 || k_max < k_min {
        return Err(Error::InvalidProblem(format!("need 10 <= k_min <= k_max, got [{k_min}, {k_max}]")));
    }
    let points: Vec<(usize, f64)> = trace
        .steps
        .iter()
        .filter(|r| (k_min..=k_max).contains(&r.index()))
        .filter_map(|r| r.error().map(|e| (r.index(), e)))
        .collect();
    let mut report = fit_rate(&points)?;
    report.k_range = (k_min, k_max);
    Ok(report)
}

/// Fits `(k, err)` pairs directly, skipping errors at or below the floor.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateReport> {
    let usable: Vec<(usize, f64, f64)> = points
        .iter()
        .filter(|(k, e)| *k >= 1 && e.is_finite() && *e > ERROR_FLOOR)
        .map(|&(k, e)| (k, (k as f64).ln(), e.ln()))
        .collect();
    if usable.len() < MIN_POINTS {
        return Err(Error::InsufficientData(usable.len()));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.2).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.1 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.1 - mx) * (p.2 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(RateReport {
        slope,
        intercept,
        k_range: (usable[0].0, usable[usable.len() - 1].0),
        points: usable.len(),
        residuals: usable.iter().map(|p| (p.0, p.2 - intercept - slope * p.1)).collect(),
    })
}
