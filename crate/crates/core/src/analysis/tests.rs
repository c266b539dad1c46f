use std::sync::{Arc, OnceLock};

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::linalg::{min_max_eigenvalue, Matrix};
use crate::prior::{EmbeddedSubspacePrior, GaussianPrior, Potential, QuadraturePrior1D};
use crate::prox::{exact_smoothed_prox, run_prox_iteration, ProxProblem, Reference, Schedule, StepForm};

fn sech() -> Arc<dyn PriorModel> {
    static PRIOR: OnceLock<Arc<QuadraturePrior1D>> = OnceLock::new();
    PRIOR
        .get_or_init(|| Arc::new(QuadraturePrior1D::with_default_grid(Potential::Sech).unwrap()))
        .clone()
}

fn embedded_sech() -> Arc<dyn PriorModel> {
    let s = 0.5f64.sqrt();
    let basis = Matrix::from_column_slice(2, 1, &[s, s]);
    Arc::new(EmbeddedSubspacePrior::new(sech(), basis, Vector::zeros(2)).unwrap())
}

fn gaussian() -> Arc<GaussianPrior> {
    Arc::new(GaussianPrior::diagonal(Vector::from_vec(vec![0.5, -1.0]), &[2.0, 0.3]).unwrap())
}

fn grid(tau: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| tau * (1.0 - i as f64 / n as f64)).chain([tau * 1e-3]).collect()
}

/// `x*_σ` for a diagonal Gaussian prior, coordinatewise.
fn gaussian_path_oracle(mean: &[f64], var: &[f64], y: &[f64], tau: f64, s2: f64) -> Vector {
    Vector::from_iterator(
        mean.len(),
        (0..mean.len()).map(|i| mean[i] + (var[i] + s2) / (var[i] + s2 + tau) * (y[i] - mean[i])),
    )
}

#[test]
fn score_sigma_derivative_rejects_zero() {
    let err = score_sigma_derivative(sech().as_ref(), 0.0, &Vector::zeros(1)).unwrap_err();
    assert!(matches!(err, Error::SigmaZero));
}

#[test]
fn score_sigma_derivative_gaussian_closed_form() {
    // s = -(z - μ)/(v + σ²), so ∂_{σ²} s = (z - μ)/(v + σ²)².
    let g = gaussian();
    let z = Vector::from_vec(vec![1.7, 0.4]);
    let s2 = 0.25;
    let got = score_sigma_derivative(g.as_ref(), s2, &z).unwrap();
    for (i, (m, v)) in [(0.5, 2.0), (-1.0, 0.3)].into_iter().enumerate() {
        assert_abs_diff_eq!(got[i], (z[i] - m) / (v + s2).powi(2), epsilon = 1e-12);
    }
}

#[test]
fn score_pde_holds_on_quadrature_priors() {
    let zs: Vec<Vector> = (0..=16).map(|i| Vector::from_element(1, -4.0 + 0.5 * i as f64)).collect();
    for s2 in [0.1, 0.5, 1.0] {
        let r = score_pde_residual(sech().as_ref(), s2, &zs, 1e-4).unwrap();
        assert!(r < 1e-5, "sigma^2 = {s2}: residual {r}");
    }
    let zs2: Vec<Vector> = (0..6).map(|i| Vector::from_vec(vec![-2.0 + 0.8 * i as f64, 0.3 * i as f64])).collect();
    let r = score_pde_residual(embedded_sech().as_ref(), 0.4, &zs2, 1e-4).unwrap();
    assert!(r < 1e-5, "embedded residual {r}");
}

#[test]
fn heat_equation_residuals() {
    let g = gaussian();
    let zs: Vec<Vector> = (0..5).map(|i| Vector::from_vec(vec![i as f64 - 2.0, 1.0 - 0.5 * i as f64])).collect();
    assert!(heat_equation_residual(g.as_ref(), 0.5, &zs).unwrap() < 1e-8);
    let zs1: Vec<Vector> = (0..=20).map(|i| Vector::from_element(1, -4.0 + 0.4 * i as f64)).collect();
    assert!(heat_equation_residual(sech().as_ref(), 0.5, &zs1).unwrap() < 1e-4);
}

#[test]
fn heat_equation_needs_room_for_the_difference() {
    let err = heat_equation_residual(sech().as_ref(), 1e-3, &[Vector::zeros(1)]).unwrap_err();
    assert!(matches!(err, Error::InvalidProblem(_)));
}

#[test]
fn maximum_principle_passes_on_log_concave_priors() {
    let levels = [0.01, 0.05, 0.1, 0.5, 1.0];
    let report = max_principle_check(sech().as_ref(), &levels).unwrap();
    assert!(report.passed);
    assert_eq!(report.margins.len(), levels.len());
    let (report, suprema) = max_principle_report(embedded_sech().as_ref(), &levels).unwrap();
    assert!(report.passed, "{suprema:?}");
    let (g, _) = max_principle_report(gaussian().as_ref(), &[0.1]).unwrap();
    assert_eq!(g.margins, vec![0.0]);
}

#[test]
fn check_report_reports_first_violation() {
    let report = CheckReport::new("demo", serde_json::Value::Null, vec![1.0, 0.0, -0.5, -2.0]);
    assert!(!report.passed);
    assert_eq!(report.min_margin(), -2.0);
    match report.into_result().unwrap_err() {
        Error::BoundViolated { check, index, value, .. } => {
            assert_eq!(check, "demo");
            assert_eq!(index, 2);
            assert_eq!(value, 0.5);
        }
        other => panic!("unexpected {other:?}"),
    }
    let nan = CheckReport::new("nan", serde_json::Value::Null, vec![f64::NAN]);
    assert!(!nan.passed);
}

#[test]
fn gaussian_path_matches_closed_form() {
    let tau = 0.8;
    let y = [3.0, -2.5];
    let problem = ProxProblem::new(Vector::from_row_slice(&y), tau, gaussian()).unwrap();
    let states = solve_solution_path(&problem, &grid(tau, 20)).unwrap();
    for s in &states {
        let want = gaussian_path_oracle(&[0.5, -1.0], &[2.0, 0.3], &y, tau, s.sigma_sq);
        assert!((&s.ode_point - &want).norm() < 1e-8, "sigma^2 = {}", s.sigma_sq);
        assert!((&s.point - &want).norm() < 1e-10);
        assert!(s.grad_norm <= NEWTON_PROJECTION_TOL);
        assert_abs_diff_eq!(s.b_term.norm(), 0.0, epsilon = 1e-14);
    }
}

#[test]
fn path_drift_matches_difference_of_minimisers() {
    let tau = 1.0;
    let problem = ProxProblem::new(Vector::from_element(1, 2.5), tau, sech()).unwrap();
    let states = solve_solution_path(&problem, &[0.8, 0.5, 0.2, 0.05]).unwrap();
    let h = 1e-4;
    for s in &states {
        let up = exact_smoothed_prox(&problem, s.sigma_sq + h, 1e-13).unwrap().point;
        let down = exact_smoothed_prox(&problem, s.sigma_sq - h, 1e-13).unwrap().point;
        let fd = (up - down) / (2.0 * h);
        assert!((&fd - &s.drift).norm() < 1e-6, "sigma^2 = {}: {fd} vs {}", s.sigma_sq, s.drift);
    }
}

#[test]
fn split_form_and_its_bounds() {
    let tau = 1.0;
    let m = sech().third_derivative_bound();
    for (y, prior) in [
        (Vector::from_element(1, 2.5), sech()),
        (Vector::from_vec(vec![3.0, -1.0]), embedded_sech()),
    ] {
        let r = prior.effective_dimension() as f64;
        let problem = ProxProblem::new(y, tau, prior).unwrap();
        for s in solve_solution_path(&problem, &grid(tau, 10)).unwrap() {
            assert!((s.split_drift(&problem) - &s.drift).norm() < 1e-8);
            assert!(s.b_term.norm() <= 0.5 * tau * m * r.sqrt() * (1.0 + 1e-9));
            assert!(min_max_eigenvalue(&s.q_term).0 >= -1e-12);
        }
    }
}

#[test]
fn path_bounds_hold() {
    for (y, prior) in [
        (Vector::from_element(1, 4.0), sech()),
        (Vector::from_vec(vec![2.0, -3.0]), embedded_sech()),
        (Vector::from_vec(vec![2.0, 2.0]), gaussian() as Arc<dyn PriorModel>),
    ] {
        let problem = ProxProblem::new(y, 0.5, prior).unwrap();
        let [bounded, lipschitz] = verify_path_bounds(&problem, &grid(0.5, 8)).unwrap();
        assert_eq!(bounded.margins.len(), 9);
        assert_eq!(lipschitz.margins.len(), 36);
    }
}

#[test]
fn path_grid_validation() {
    let problem = ProxProblem::new(Vector::from_element(1, 1.0), 1.0, sech()).unwrap();
    for bad in [vec![], vec![0.5, 0.7], vec![1.5, 0.5], vec![0.5, 0.0]] {
        assert!(matches!(solve_solution_path(&problem, &bad), Err(Error::InvalidProblem(_))), "{bad:?}");
    }
}

#[test]
fn path_csv_layout() {
    let problem = ProxProblem::new(Vector::from_vec(vec![1.0, 2.0]), 1.0, gaussian()).unwrap();
    let states = solve_solution_path(&problem, &[1.0, 0.5]).unwrap();
    let csv = path_csv(&states);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sigma_sq,x_1,x_2,drift_norm,grad_norm,B_norm");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("0.5,"));
    assert_eq!(lines[1].split(',').count(), 6);
}

#[test]
fn rate_fit_recovers_power_laws() {
    let pts: Vec<(usize, f64)> = (10..=200).map(|k| (k, 3.0 / k as f64)).collect();
    let r = fit_rate(&pts).unwrap();
    assert_abs_diff_eq!(r.slope, -1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(r.intercept, 3.0f64.ln(), epsilon = 1e-10);
    assert_eq!(r.points, 191);
    assert!(r.residuals.iter().all(|(_, e)| e.abs() < 1e-10));
}

#[test]
fn rate_fit_skips_floor_and_short_ranges() {
    let mut pts: Vec<(usize, f64)> = (10..20).map(|k| (k, (k as f64).powf(-2.0))).collect();
    pts.push((20, 0.0));
    let r = fit_rate(&pts).unwrap();
    assert_eq!(r.points, 10);
    assert_abs_diff_eq!(r.slope, -2.0, epsilon = 1e-12);
    assert!(matches!(fit_rate(&pts[..9]), Err(Error::InsufficientData(9))));
}

#[test]
fn rate_slope_on_a_gaussian_run() {
    let problem = ProxProblem::new(Vector::from_vec(vec![3.0, -2.0]), 1.0, gaussian()).unwrap();
    let trace = run_prox_iteration(
        &problem,
        &Schedule::paper_default(1.0).unwrap(),
        400,
        StepForm::Averaging,
        &Reference::Exact,
    )
    .unwrap();
    let r = rate_slope(&trace, 10, 400).unwrap();
    assert!(r.slope <= -0.9, "slope {}", r.slope);
    assert_eq!(r.k_range, (10, 400));
    assert!(matches!(rate_slope(&trace, 5, 400), Err(Error::InvalidProblem(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gaussian_path_is_monotone_in_sigma(y in prop::collection::vec(-5.0f64..5.0, 2), tau in 0.2f64..2.0) {
        let problem = ProxProblem::new(Vector::from_vec(y.clone()), tau, gaussian()).unwrap();
        let states = solve_solution_path(&problem, &grid(tau, 6)).unwrap();
        for s in &states {
            let want = gaussian_path_oracle(&[0.5, -1.0], &[2.0, 0.3], &y, tau, s.sigma_sq);
            prop_assert!((&s.point - &want).norm() < 1e-9);
        }
        // Each coordinate moves away from y monotonically as σ² decreases.
        for w in states.windows(2) {
            for ((later, earlier), yi) in w[1].point.iter().zip(w[0].point.iter()).zip(y.iter()) {
                prop_assert!((later - yi).abs() >= (earlier - yi).abs() - 1e-12);
            }
        }
    }

    #[test]
    fn sech_path_bounds(y in -6.0f64..6.0, tau in 0.1f64..2.0) {
        let problem = ProxProblem::new(Vector::from_element(1, y), tau, sech()).unwrap();
        let reports = path_bounds_report(&problem, &grid(tau, 5)).unwrap();
        prop_assert!(reports.iter().all(|r| r.passed));
    }
}
