use std::sync::Arc;

use tweedie_prox::map::{approx_pgd, exact_pgd, map_reference, InnerSchedule, LinearGaussianFidelity, MapProblem};
use tweedie_prox::prox::{exact_prox, run_prox_iteration, theorem1_bound};
use tweedie_prox::{CsvRecord, Matrix, PriorSpec, ProxProblem, Reference, Schedule, StepForm, Vector};

fn prior_from_json(json: &str) -> Arc<dyn tweedie_prox::PriorModel> {
    serde_json::from_str::<PriorSpec>(json).unwrap().build().unwrap()
}

#[test]
fn priors_build_from_serialised_descriptions() {
    let gauss = prior_from_json(r#"{"kind":"gaussian","mean":[0,1],"diagonal":[1,4]}"#);
    assert_eq!(gauss.dimension(), 2);
    let sech = prior_from_json(r#"{"kind":"quadrature1d","potential":"sech","lo":-40,"hi":40,"points":8001}"#);
    assert_eq!(sech.dimension(), 1);
    let embedded = prior_from_json(
        r#"{"kind":"embedded",
            "base":{"kind":"quadrature1d","potential":"sech","lo":-40,"hi":40,"points":8001},
            "basis":[[0.6,0.8,0.0]],"offset":[0,0,1]}"#,
    );
    assert_eq!(embedded.dimension(), 3);
    assert_eq!(embedded.effective_dimension(), 1);
    assert!(serde_json::from_str::<PriorSpec>(r#"{"kind":"laplace"}"#).is_err());
}

#[test]
fn averaging_reaches_the_proximal_point_within_the_bound() {
    let prior = prior_from_json(r#"{"kind":"quadrature1d","potential":"sech","lo":-40,"hi":40,"points":8001}"#);
    let problem = ProxProblem::new(Vector::from_element(1, 3.0), 1.0, prior).unwrap();
    let schedule = Schedule::paper_default(1.0).unwrap();
    let trace = run_prox_iteration(&problem, &schedule, 2000, StepForm::Averaging, &Reference::Exact).unwrap();
    let prox = exact_prox(&problem, 1e-12).unwrap().point;
    let final_err = (trace.last() - &prox).norm();
    assert!(final_err <= theorem1_bound(&problem, 2000).unwrap());
    assert!(final_err < 1e-3);
    for row in &trace.steps {
        if let (Some(err), Some(bound)) = (row.err, row.bound) {
            assert!(err <= bound, "k = {}", row.k);
        }
    }
}

#[test]
fn trace_csv_has_one_row_per_iterate() {
    let prior = prior_from_json(r#"{"kind":"gaussian","mean":[0],"diagonal":[1]}"#);
    let problem = ProxProblem::new(Vector::from_element(1, 2.0), 1.0, prior).unwrap();
    let schedule = Schedule::paper_default(1.0).unwrap();
    let trace = run_prox_iteration(&problem, &schedule, 10, StepForm::Gradient, &Reference::Exact).unwrap();
    let csv = trace.to_csv_string();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), tweedie_prox::prox::ProxStep::header());
    assert_eq!(lines.count(), trace.steps.len());
}

#[test]
fn map_estimation_for_a_blurred_signal() {
    let gauss = prior_from_json(r#"{"kind":"gaussian","mean":[0,0],"diagonal":[1,0.5]}"#);
    let a = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 0.8]);
    let fidelity = Arc::new(LinearGaussianFidelity::new(a, Vector::from_vec(vec![1.0, -0.5])).unwrap());
    let problem = MapProblem::new(fidelity, gauss, 1.0, 0.5, Vector::from_vec(vec![1.0, -0.5])).unwrap();
    let reference = map_reference(&problem).unwrap();
    let exact = exact_pgd(&problem, 200).unwrap();
    assert!((exact.last() - &reference.x_map).norm() < 1e-8);
    let inner = InnerSchedule::new(10.0, 1.0).unwrap();
    let approx = approx_pgd(&problem, &inner, 20).unwrap();
    assert!((approx.last() - &reference.x_map).norm() < 0.05);
    assert_eq!(approx.steps.iter().map(|r| r.n_inner).take(3).collect::<Vec<_>>(), vec![10, 40, 90]);
}
