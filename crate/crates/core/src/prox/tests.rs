use std::sync::{Arc, OnceLock};

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::prior::{GaussianPrior, Potential, QuadraturePrior1D};

fn sech() -> Arc<dyn PriorModel> {
    static PRIOR: OnceLock<Arc<QuadraturePrior1D>> = OnceLock::new();
    PRIOR
        .get_or_init(|| Arc::new(QuadraturePrior1D::with_default_grid(Potential::Sech).unwrap()))
        .clone()
}

fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

fn std_gaussian_problem(y: f64, tau: f64) -> ProxProblem {
    ProxProblem::new(v1(y), tau, Arc::new(GaussianPrior::standard(1).unwrap())).unwrap()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn problem_validation() {
    let prior: Arc<dyn PriorModel> = Arc::new(GaussianPrior::standard(2).unwrap());
    assert!(ProxProblem::new(Vector::zeros(2), 0.0, prior.clone()).is_err());
    assert!(ProxProblem::new(Vector::zeros(2), -1.0, prior.clone()).is_err());
    assert!(matches!(
        ProxProblem::new(Vector::zeros(3), 1.0, prior).unwrap_err(),
        Error::DimensionMismatch { .. }
    ));
}

#[test]
fn first_step_both_forms() {
    let p = std_gaussian_problem(2.0, 1.0);
    let s = Schedule::paper_default(1.0).unwrap();
    assert_abs_diff_eq!(mmse_averaging_step(&p, &s, 0, &v1(2.0)).unwrap()[0], 1.5, epsilon = 1e-15);
    assert_abs_diff_eq!(smoothed_gd_step(&p, &s, 0, &v1(2.0)).unwrap()[0], 1.5, epsilon = 1e-15);
}

#[test]
fn degenerate_custom_schedules() {
    let p = ProxProblem::new(v1(1.3), 0.5, sech()).unwrap();
    let s = Schedule::custom(vec![0.0], vec![0.2], vec![0.0]).unwrap();
    assert_eq!(mmse_averaging_step(&p, &s, 0, &v1(-0.4)).unwrap(), v1(1.3));
    assert_eq!(smoothed_gd_step(&p, &s, 0, &v1(-0.4)).unwrap(), v1(-0.4));
    assert_eq!(mmse_averaging_step(&p, &s, 1, &v1(0.0)).unwrap_err(), Error::ScheduleExhausted(1));
}

#[test]
fn forms_agree_on_sech() {
    let p = ProxProblem::new(v1(1.0), 0.5, sech()).unwrap();
    let s = Schedule::paper_default(0.5).unwrap();
    let a = mmse_averaging_step(&p, &s, 3, &v1(0.8)).unwrap()[0];
    let b = smoothed_gd_step(&p, &s, 3, &v1(0.8)).unwrap()[0];
    assert!((a - b).abs() <= 1e-12 * a.abs());
}

#[test]
fn forms_agree_on_ill_conditioned_gaussian() {
    let prior = GaussianPrior::diagonal(Vector::zeros(2), &[1.0, 1.0 / 999.0]).unwrap();
    let p = ProxProblem::new(Vector::from_vec(vec![3.0, 3.0]), 1.0, Arc::new(prior)).unwrap();
    let s = Schedule::paper_default(1.0).unwrap();
    let x = Vector::from_vec(vec![1.2, 0.4]);
    let a = mmse_averaging_step(&p, &s, 5, &x).unwrap();
    let b = smoothed_gd_step(&p, &s, 5, &x).unwrap();
    assert!((&a - &b).norm() <= 1e-12 * a.norm());
}

#[test]
fn gaussian_ten_steps() {
    let p = std_gaussian_problem(2.0, 1.0);
    let s = Schedule::paper_default(1.0).unwrap();
    let t = run_prox_iteration(&p, &s, 10, StepForm::Averaging, &Reference::Exact).unwrap();
    assert_eq!(t.iterates.len(), 11);
    assert_eq!(t.steps.len(), 10);
    assert_abs_diff_eq!(t.last()[0], 1.0 + 1.0 / 11.0, epsilon = 1e-14);
    for row in &t.steps {
        assert_abs_diff_eq!(row.err.unwrap(), 1.0 / (row.k as f64 + 1.0), epsilon = 1e-14);
        assert!(row.err.unwrap() <= row.bound.unwrap());
    }
}

#[test]
fn single_step_unrolling() {
    let p = ProxProblem::new(v1(1.5), 0.5, sech()).unwrap();
    let s = Schedule::paper_default(0.5).unwrap();
    let t = run_prox_iteration(&p, &s, 1, StepForm::Averaging, &Reference::None).unwrap();
    let expected = 0.5 * sech().mmse(0.5, &v1(1.5)).unwrap()[0] + 0.75;
    assert_abs_diff_eq!(t.last()[0], expected, epsilon = 1e-15);
    assert!(t.steps[0].err.is_none() && t.steps[0].bound.is_none());
}

#[test]
fn zero_steps_rejected() {
    let p = std_gaussian_problem(2.0, 1.0);
    let s = Schedule::paper_default(1.0).unwrap();
    assert!(run_prox_iteration(&p, &s, 0, StepForm::Averaging, &Reference::None).is_err());
}

#[test]
fn divergence_truncates_trace() {
    let p = std_gaussian_problem(2.0, 1.0);
    // γ = 5 on a 2-smooth quadratic multiplies the error by -9 each step.
    let s = Schedule::custom(vec![0.5; 40], vec![1.0; 40], vec![5.0; 40]).unwrap();
    let t = run_prox_iteration(&p, &s, 40, StepForm::Gradient, &Reference::Exact).unwrap();
    let cut = t.truncation.clone().expect("run should diverge");
    assert_eq!(t.len(), cut.step);
    assert!(cut.step < 40);
    assert!(t.iterates.iter().all(|x| x.iter().all(|v| v.is_finite())));
}

#[test]
fn exact_prox_examples() {
    let sol = exact_prox(&std_gaussian_problem(2.0, 1.0), 1e-12).unwrap();
    assert_abs_diff_eq!(sol.point[0], 1.0, epsilon = 1e-15);

    let sol = exact_prox(&ProxProblem::new(v1(1.5), 1e-8, sech()).unwrap(), 1e-12).unwrap();
    assert!((sol.point[0] - 1.5).abs() <= 1e-6);

    let (y, tau) = (1.5, 0.5);
    let sol = exact_prox(&ProxProblem::new(v1(y), tau, sech()).unwrap(), 1e-12).unwrap();
    let root = bisect(-5.0, 5.0, |x| (x - y) + tau * x.tanh());
    assert_abs_diff_eq!(sol.point[0], root, epsilon = 1e-10);
    assert!(sol.gradient_norm <= 1e-12);
    assert!(sol.newton_iters > 0 && sol.newton_iters < MAX_NEWTON_STEPS);
}

#[test]
fn exact_smoothed_prox_examples() {
    let p = std_gaussian_problem(2.0, 1.0);
    assert_abs_diff_eq!(exact_smoothed_prox(&p, 1.0, 1e-12).unwrap().point[0], 4.0 / 3.0, epsilon = 1e-15);
    let far = exact_smoothed_prox(&p, 1e6, 1e-12).unwrap().point;
    assert!((far - p.y()).norm() <= 1e-3);

    let (y, tau, s2) = (1.5, 0.5, 0.25);
    let p = ProxProblem::new(v1(y), tau, sech()).unwrap();
    let sol = exact_smoothed_prox(&p, s2, 1e-12).unwrap();
    let root = bisect(-5.0, 5.0, |x| p.smoothed_gradient(s2, &v1(x)).unwrap()[0]);
    assert_abs_diff_eq!(sol.point[0], root, epsilon = 1e-10);
}

#[test]
fn exact_prox_rejects_bad_tolerance() {
    assert!(exact_prox(&std_gaussian_problem(2.0, 1.0), 0.0).is_err());
}

#[test]
fn gaussian_closed_form_matches_newton_path() {
    // Rotated covariance: compare the closed form with the generic normal equations.
    let q = nalgebra::Rotation2::new(0.4).into_inner();
    let q = Matrix::from_iterator(2, 2, q.iter().copied());
    let g = GaussianPrior::new(Vector::from_vec(vec![1.0, -1.0]), Vector::from_vec(vec![3.0, 0.2]), q).unwrap();
    let sigma_sq = 0.3;
    let p = ProxProblem::new(Vector::from_vec(vec![0.5, 2.0]), 0.7, Arc::new(g.clone())).unwrap();
    let sol = exact_smoothed_prox(&p, sigma_sq, 1e-12).unwrap();
    let prec = g.smoothed_precision(sigma_sq);
    let lhs = Matrix::identity(2, 2) + &prec * 0.7;
    let rhs = p.y() + &prec * g.mean() * 0.7;
    let direct = lhs.lu().solve(&rhs).unwrap();
    assert!((sol.point - direct).norm() <= 1e-13);
}

#[test]
fn naive_gd_on_quadratic() {
    let l = 999.0;
    let prior = GaussianPrior::diagonal(Vector::zeros(2), &[1.0, 1.0 / l]).unwrap();
    let p = ProxProblem::new(Vector::from_vec(vec![3.0, 3.0]), 1.0, Arc::new(prior)).unwrap();
    let lf = 1.0 + l;
    let gamma = 0.8 / lf;
    let t = naive_gd(&p, gamma, 20, &Reference::Exact).unwrap();
    let x_star = Vector::from_vec(vec![1.5, 3.0 / 1000.0]);
    let factors = [1.0 - gamma * 2.0, 1.0 - gamma * 1000.0];
    for (k, x) in t.iterates.iter().enumerate() {
        for i in 0..2 {
            let expected = x_star[i] + (3.0 - x_star[i]) * factors[i].powi(k as i32);
            assert_abs_diff_eq!(x[i], expected, epsilon = 1e-12);
        }
    }

    let still = naive_gd(&p, 0.0, 5, &Reference::None).unwrap();
    assert!(still.iterates.iter().all(|x| x == p.y()));

    let blown = naive_gd(&p, 3.0 / lf, 500, &Reference::None).unwrap();
    assert!(blown.is_truncated());
}

#[test]
fn theorem1_bound_examples() {
    let p = std_gaussian_problem(2.0, 1.0);
    assert_abs_diff_eq!(theorem1_bound(&p, 1).unwrap(), 3.5, epsilon = 1e-15);
    assert!(theorem1_bound(&p, 0).is_err());

    let at_opt = std_gaussian_problem(0.0, 1.0);
    assert_eq!(theorem1_bound(&at_opt, 1).unwrap(), 0.0);

    let p = ProxProblem::new(v1(1.5), 0.5, sech()).unwrap();
    let x_star = exact_prox(&p, 1e-12).unwrap().point[0];
    let m = sech().third_derivative_bound();
    let expected = (100f64.ln() + 7.0) / 101.0 * ((1.5 - x_star).abs() + 0.25 * m);
    assert_abs_diff_eq!(theorem1_bound(&p, 100).unwrap(), expected, epsilon = 1e-14);
}

#[test]
fn bound_is_nonincreasing_from_three() {
    let b = Theorem1Bound {
        initial_gap: 1.0,
        curvature_term: 0.3,
    };
    for k in 3..20_000 {
        assert!(b.at(k + 1) <= b.at(k));
    }
}

#[test]
fn schedule_identities() {
    for tau in [0.1, 0.5, 1.0, 3.0] {
        let s = Schedule::paper_default(tau).unwrap();
        for k in 0..1000 {
            assert_eq!(s.smoothness(k), Some(k as u64 + 2));
            let gamma = s.gamma(k).unwrap();
            let l = 1.0 + tau / s.sigma_sq(k).unwrap();
            assert!((gamma * l - 1.0).abs() <= 4.0 * f64::EPSILON);
            let a = s.alpha(k).unwrap();
            assert!(a > 0.0 && a < 1.0);
            assert!((a - (1.0 - gamma)).abs() <= f64::EPSILON);
            assert!(s.sigma_sq(k + 1).unwrap() < s.sigma_sq(k).unwrap());
        }
    }
    assert!(Schedule::paper_default(0.0).is_err());
    assert!(Schedule::custom(vec![0.5], vec![1.0, 2.0], vec![0.5]).is_err());
}

#[test]
fn cold_diffusion_weights() {
    let s = Schedule::cold_diffusion(1.0, 4).unwrap();
    assert_eq!(s.steps(), Some(4));
    assert_eq!(s.alpha(0).unwrap(), 0.0);
    assert_eq!(s.alpha(3).unwrap(), 0.75);
    assert_eq!(s.kind(), "custom");
}

#[test]
fn csv_layout() {
    let p = std_gaussian_problem(2.0, 1.0);
    let s = Schedule::paper_default(1.0).unwrap();
    let with_ref = run_prox_iteration(&p, &s, 2, StepForm::Averaging, &Reference::Exact).unwrap();
    let csv = with_ref.to_csv_string();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,sigma_sq,alpha,gamma,err,bound,obj");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,1,0.5,0.5,"));

    let no_ref = run_prox_iteration(&p, &s, 2, StepForm::Averaging, &Reference::None).unwrap();
    let row = no_ref.to_csv_string().lines().nth(1).unwrap().to_string();
    assert_eq!(row.split(',').nth(4), Some(""));
    assert_eq!(row.split(',').nth(5), Some(""));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gaussian_exactness(y in -5.0f64..5.0, mean in -2.0f64..2.0, var in 0.05f64..20.0, tau in 0.05f64..3.0) {
        let prior = GaussianPrior::diagonal(v1(mean), &[var]).unwrap();
        let p = ProxProblem::new(v1(y), tau, Arc::new(prior)).unwrap();
        let s = Schedule::paper_default(tau).unwrap();
        let x_star = exact_prox(&p, 1e-12).unwrap().point[0];
        let t = run_prox_iteration(&p, &s, 200, StepForm::Averaging, &Reference::None).unwrap();
        for (k, x) in t.iterates.iter().enumerate() {
            let dev = (x[0] - x_star) - (y - x_star) / (k as f64 + 1.0);
            prop_assert!(dev.abs() <= 1e-10 * (1.0 + (y - x_star).abs()));
        }
    }

    #[test]
    fn smoothed_hessian_conditioning(z in -4.0f64..4.0, frac in prop::sample::select(vec![1.0, 0.5, 0.1]), tau in 0.1f64..2.0) {
        let p = ProxProblem::new(v1(0.0), tau, sech()).unwrap();
        let s2 = tau * frac;
        let h = p.smoothed_hessian(s2, &v1(z)).unwrap()[(0, 0)];
        prop_assert!(h >= 1.0 - 1e-9 && h <= 1.0 + tau / s2 + 1e-9);
    }
}
