//! One-dimensional log-concave priors evaluated by quadrature.
//!
//! For `σ > 0` every query is a trapezoid rule over nodes centred on `z`: the
//! Gaussian kernel is resolved by at least [`QuadratureOptions::points_per_sd`]
//! nodes per standard deviation and the node spacing never exceeds the stored
//! grid step, so both the kernel and the prior are resolved. Sums are carried out
//! in the log domain. Derivatives of `ln p_σ` in `z` are cumulants of the posterior
//! of `X` given `X + σε = z`, scaled by powers of `1/σ²`, so the score, Hessian and
//! third derivative all come from the same pass.

use std::f64::consts::PI;

use super::{check_query, Potential, PriorModel, PriorSpec, SmoothedDerivatives, CERTIFICATION_SAFETY_FACTOR};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{Matrix, Tensor3, Vector};

/// Mass that may lie outside the stored grid.
const MAX_TAIL_MASS: f64 = 1e-10;
/// Allowed drift of the normalising integral after renormalisation.
const NORMALISATION_TOL: f64 = 1e-6;
/// Maximum relative change of the certified supremum under one grid halving.
const REFINEMENT_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Half-width of the integration window in kernel standard deviations.
    pub window_sds: f64,
    /// Minimum nodes per kernel standard deviation.
    pub points_per_sd: f64,
    /// Tolerance on negative discrete second differences of `V`.
    pub concavity_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            window_sds: 12.0,
            points_per_sd: 20.0,
            concavity_tol: 1e-9,
        }
    }
}

/// Quadratic continuation `V(edge) + V'(edge) t + V''(edge) t²/2` beyond a grid edge.
#[derive(Debug, Clone, Copy)]
struct Tail {
    edge: f64,
    value: f64,
    slope: f64,
    curvature: f64,
}

impl Tail {
    fn derivatives(&self, x: f64) -> [f64; 4] {
        let t = x - self.edge;
        [
            self.value + self.slope * t + 0.5 * self.curvature * t * t,
            self.slope + self.curvature * t,
            self.curvature,
            0.0,
        ]
    }
}

/// Posterior summaries in units of `u = (x - z)/σ`.
#[derive(Debug, Clone, Copy)]
struct PosteriorMoments {
    log_density: f64,
    mean: f64,
    var: f64,
    third: f64,
}

#[derive(Debug, Clone)]
pub struct QuadraturePrior1D {
    potential: Potential,
    lo: f64,
    hi: f64,
    step: f64,
    /// `V = -ln p` on the grid, after renormalisation.
    table: Vec<f64>,
    /// Constant added to the raw potential so that the grid integral is one.
    log_norm: f64,
    left: Tail,
    right: Tail,
    third_bound: f64,
    options: QuadratureOptions,
}

impl QuadraturePrior1D {
    pub fn new(potential: Potential, lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::with_options(potential, lo, hi, points, QuadratureOptions::default())
    }

    /// Prior on its default grid with 100 nodes per unit length.
    pub fn with_default_grid(potential: Potential) -> Result<Self> {
        let (lo, hi) = potential.default_bounds();
        Self::new(potential, lo, hi, ((hi - lo) * 100.0).round() as usize + 1)
    }

    pub fn with_options(
        potential: Potential,
        lo: f64,
        hi: f64,
        points: usize,
        options: QuadratureOptions,
    ) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidPrior(format!("grid bounds must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        if points < 7 {
            return Err(Error::InvalidPrior(format!("grid needs at least 7 points, got {points}")));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let raw: Vec<f64> = (0..points).map(|i| potential.value(lo + i as f64 * step)).collect();

        if let Some(i) = (1..points - 1).find(|&i| raw[i + 1] - 2.0 * raw[i] + raw[i - 1] < -options.concavity_tol) {
            return Err(Error::NotLogConcave(format!(
                "negative second difference of V at x = {}",
                lo + i as f64 * step
            )));
        }

        let log_norm = log_trapezoid(&raw.iter().map(|v| -v).collect::<Vec<_>>(), step);
        let table: Vec<f64> = raw.iter().map(|v| v + log_norm).collect();

        let edge = |x: f64| {
            let d = potential.derivatives(x);
            Tail {
                edge: x,
                value: d[0] + log_norm,
                slope: d[1],
                curvature: d[2],
            }
        };
        let left = edge(lo);
        let right = edge(hi);

        // ∫ exp(-(a + b t + c t²/2)) dt over t ≥ 0 is at most exp(-a)/b for b > 0, c ≥ 0.
        let tail_mass = |t: &Tail, outward_slope: f64| {
            if outward_slope <= 0.0 || t.curvature < 0.0 {
                f64::INFINITY
            } else {
                (-t.value).exp() / outward_slope
            }
        };
        let outside = tail_mass(&left, -left.slope) + tail_mass(&right, right.slope);
        if !(outside <= MAX_TAIL_MASS) {
            return Err(Error::InvalidPrior(format!(
                "grid [{lo}, {hi}] leaves mass {outside:.3e} outside (max {MAX_TAIL_MASS:e})"
            )));
        }

        let mass = log_trapezoid(&table.iter().map(|v| -v).collect::<Vec<_>>(), step).exp();
        if (mass - 1.0).abs() > NORMALISATION_TOL {
            return Err(Error::InvalidPrior(format!("normalisation drifted to {mass}")));
        }

        let mut prior = Self {
            potential,
            lo,
            hi,
            step,
            table,
            log_norm,
            left,
            right,
            third_bound: f64::NAN,
            options,
        };
        prior.third_bound = prior.certify_third_derivative_bound()?;
        Ok(prior)
    }

    pub fn potential(&self) -> Potential {
        self.potential
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn grid_step(&self) -> f64 {
        self.step
    }

    pub fn grid_points(&self) -> usize {
        self.table.len()
    }

    /// Tabulated `V = -ln p` on the stored grid.
    pub fn tabulated_potential(&self) -> &[f64] {
        &self.table
    }

    /// `[V, V', V'', V''']` of the normalised potential, quadratic beyond the grid.
    pub fn potential_derivatives(&self, x: f64) -> [f64; 4] {
        if x < self.lo {
            self.left.derivatives(x)
        } else if x > self.hi {
            self.right.derivatives(x)
        } else {
            let mut d = self.potential.derivatives(x);
            d[0] += self.log_norm;
            d
        }
    }

    fn potential_value(&self, x: f64) -> f64 {
        if x < self.lo {
            self.left.derivatives(x)[0]
        } else if x > self.hi {
            self.right.derivatives(x)[0]
        } else {
            self.potential.value(x) + self.log_norm
        }
    }

    fn scalar(z: &Vector) -> f64 {
        z[0]
    }

    fn check_coverage(&self, z: f64, sigma: f64) -> Result<()> {
        let slack = 1e-12 * (1.0 + z.abs());
        if z < self.lo - 6.0 * sigma - slack || z > self.hi + 6.0 * sigma + slack {
            Err(Error::TailEscape {
                z,
                lo: self.lo,
                hi: self.hi,
                sigma,
            })
        } else {
            Ok(())
        }
    }

    fn posterior_moments(&self, sigma_sq: f64, z: f64) -> Result<PosteriorMoments> {
        let sigma = sigma_sq.sqrt();
        self.check_coverage(z, sigma)?;
        let reach = self.options.window_sds * sigma;
        let margin = self.options.window_sds * sigma.min(1.0);
        let a = (z - reach).max(self.lo - margin);
        let b = (z + reach).min(self.hi + margin);
        let target = self.step.min(sigma / self.options.points_per_sd);
        let n = (((b - a) / target).ceil() as usize).max(8) + 1;
        let h = (b - a) / (n - 1) as f64;

        let mut us = Vec::with_capacity(n);
        let mut logs = Vec::with_capacity(n);
        let mut max_log = f64::NEG_INFINITY;
        for j in 0..n {
            let x = a + j as f64 * h;
            let u = (x - z) / sigma;
            let edge = if j == 0 || j == n - 1 { 0.5f64.ln() } else { 0.0 };
            let l = -self.potential_value(x) - 0.5 * u * u + edge;
            max_log = max_log.max(l);
            us.push(u);
            logs.push(l);
        }
        let weights: Vec<f64> = logs.iter().map(|l| (l - max_log).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mean = weights.iter().zip(&us).map(|(w, u)| w * u).sum::<f64>() / total;
        let (mut m2, mut m3) = (0.0, 0.0);
        for (w, u) in weights.iter().zip(&us) {
            let c = u - mean;
            m2 += w * c * c;
            m3 += w * c * c * c;
        }
        let log_density = max_log + total.ln() + h.ln() - 0.5 * (2.0 * PI * sigma_sq).ln();
        Ok(PosteriorMoments {
            log_density: ensure_finite(log_density, "smoothed log-density")?,
            mean,
            var: m2 / total,
            third: m3 / total,
        })
    }

    fn unsmoothed(&self, z: f64) -> Result<[f64; 4]> {
        self.check_coverage(z, 0.0)?;
        let mut d = self.potential_derivatives(z);
        for v in &mut d {
            *v = -*v;
        }
        Ok(d)
    }

    /// Supremum of `|∂³V|` over a grid with spacing `step`, from third central
    /// differences of the tabulated potential.
    fn grid_third_supremum(&self, step: f64) -> f64 {
        let n = ((self.hi - self.lo) / step).round() as usize + 1;
        let values: Vec<f64> = (0..n).map(|i| self.potential_value(self.lo + i as f64 * step)).collect();
        let h3 = 2.0 * step * step * step;
        (2..n - 2)
            .map(|i| ((values[i + 2] - 2.0 * values[i + 1] + 2.0 * values[i - 1] - values[i - 2]) / h3).abs())
            .fold(0.0, f64::max)
    }
}

/// `ln Σ w_i exp(l_i)` for trapezoid weights with spacing `h`.
fn log_trapezoid(logs: &[f64], h: f64) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = logs.len();
    let s: f64 = logs
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            w * (l - max).exp()
        })
        .sum();
    max + (s * h).ln()
}

impl PriorModel for QuadraturePrior1D {
    fn dimension(&self) -> usize {
        1
    }

    fn third_derivative_bound(&self) -> f64 {
        self.third_bound
    }

    fn certify_third_derivative_bound(&self) -> Result<f64> {
        let coarse = self.grid_third_supremum(self.step);
        let fine = self.grid_third_supremum(0.5 * self.step);
        let scale = coarse.max(fine);
        if scale > 0.0 {
            let relative_change = (fine - coarse).abs() / scale;
            if relative_change > REFINEMENT_TOL {
                return Err(Error::GridTooCoarse { relative_change });
            }
        }
        Ok(fine * CERTIFICATION_SAFETY_FACTOR)
    }

    fn log_density_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<f64> {
        check_query(1, sigma_sq, z)?;
        let z = Self::scalar(z);
        if sigma_sq == 0.0 {
            return Ok(self.unsmoothed(z)?[0]);
        }
        Ok(self.posterior_moments(sigma_sq, z)?.log_density)
    }

    fn score_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Vector> {
        check_query(1, sigma_sq, z)?;
        let z = Self::scalar(z);
        let value = if sigma_sq == 0.0 {
            self.unsmoothed(z)?[1]
        } else {
            self.posterior_moments(sigma_sq, z)?.mean / sigma_sq.sqrt()
        };
        Ok(Vector::from_element(1, ensure_finite(value, "smoothed score")?))
    }

    fn hessian_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Matrix> {
        check_query(1, sigma_sq, z)?;
        let z = Self::scalar(z);
        let value = if sigma_sq == 0.0 {
            self.unsmoothed(z)?[2]
        } else {
            (self.posterior_moments(sigma_sq, z)?.var - 1.0) / sigma_sq
        };
        Ok(Matrix::from_element(1, 1, ensure_finite(value, "smoothed hessian")?))
    }

    fn third_deriv_smoothed(&self, sigma_sq: f64, z: &Vector) -> Result<Tensor3> {
        check_query(1, sigma_sq, z)?;
        let z = Self::scalar(z);
        let value = if sigma_sq == 0.0 {
            self.unsmoothed(z)?[3]
        } else {
            self.posterior_moments(sigma_sq, z)?.third / (sigma_sq * sigma_sq.sqrt())
        };
        Ok(Tensor3::scalar(ensure_finite(value, "smoothed third derivative")?))
    }

    fn posterior_variance(&self, sigma_sq: f64, z: &Vector) -> Result<Matrix> {
        check_query(1, sigma_sq, z)?;
        if sigma_sq == 0.0 {
            return Err(Error::SigmaZero);
        }
        let m = self.posterior_moments(sigma_sq, Self::scalar(z))?;
        Ok(Matrix::from_element(1, 1, m.var * sigma_sq))
    }

    fn smoothed_derivatives(&self, sigma_sq: f64, z: &Vector) -> Result<SmoothedDerivatives> {
        check_query(1, sigma_sq, z)?;
        let z = Self::scalar(z);
        let [v0, v1, v2, v3] = if sigma_sq == 0.0 {
            self.unsmoothed(z)?
        } else {
            let m = self.posterior_moments(sigma_sq, z)?;
            let sigma = sigma_sq.sqrt();
            [
                m.log_density,
                m.mean / sigma,
                (m.var - 1.0) / sigma_sq,
                m.third / (sigma_sq * sigma),
            ]
        };
        Ok(SmoothedDerivatives {
            log_density: v0,
            score: Vector::from_element(1, v1),
            hessian: Matrix::from_element(1, 1, v2),
            third: Tensor3::scalar(v3),
        })
    }

    fn supremum_grid(&self, sigma_sq: f64) -> Vec<Vector> {
        let ext = 6.0 * sigma_sq.sqrt();
        let (a, b) = (self.lo - ext, self.hi + ext);
        let n = ((b - a) / self.step).round() as usize + 1;
        let h = (b - a) / (n - 1) as f64;
        (0..n).map(|i| Vector::from_element(1, (a + i as f64 * h).min(b))).collect()
    }

    fn spec(&self) -> PriorSpec {
        PriorSpec::Quadrature1d {
            potential: self.potential,
            lo: self.lo,
            hi: self.hi,
            points: self.table.len(),
        }
    }
}
