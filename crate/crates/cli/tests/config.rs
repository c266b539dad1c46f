use std::path::Path;

use tweedie_prox_cli::{resolve_output_dir, validate, CliError, ExperimentConfig};

fn parse(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

fn config_error(err: CliError) -> String {
    match err {
        CliError::ConfigInvalid(msg) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn flat_values_are_typed() {
    let c = parse("experiment = \"fig1-levelsets\"\nseed = 3\ntau = 2\ny = [1.5, -2]\n");
    let p = c.params();
    assert_eq!(c.experiment_name().unwrap(), "fig1-levelsets");
    assert_eq!(c.seed().unwrap(), 3);
    assert_eq!(p.f64("tau", 0.0).unwrap(), 2.0);
    assert_eq!(p.f64_list("y", &[]).unwrap(), vec![1.5, -2.0]);
    assert_eq!(p.f64("L", 999.0).unwrap(), 999.0);
}

#[test]
fn seed_defaults_to_zero() {
    assert_eq!(parse("experiment = \"fig1-levelsets\"").seed().unwrap(), 0);
}

#[test]
fn nested_tables_are_rejected() {
    let msg = config_error(ExperimentConfig::parse("experiment = \"x\"\n[prior]\nkind = \"sech\"\n").unwrap_err());
    assert!(msg.contains("nested tables"), "{msg}");
}

#[test]
fn syntax_errors_are_config_errors() {
    let err = ExperimentConfig::parse("tau = = 1").unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unknown_keys_report_their_line() {
    let c = parse("experiment = \"fig1-levelsets\"\ntau = 1\nresolutoin = 11\n");
    let msg = config_error(validate(&c).err().unwrap());
    assert!(msg.contains("`resolutoin` (line 3)"), "{msg}");
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let msg = config_error(validate(&parse("experiment = \"fig3\"")).err().unwrap());
    assert!(msg.contains("fig3"), "{msg}");
}

#[test]
fn missing_experiment_is_a_config_error() {
    assert_eq!(validate(&parse("seed = 1")).err().unwrap().exit_code(), 2);
}

#[test]
fn overrides_replace_file_values() {
    let mut c = parse("experiment = \"fig1-levelsets\"\ntau = 1\n");
    c.set_override("tau=0.25").unwrap();
    c.set_override("y=[1, 2]").unwrap();
    c.set_override("prior=sech").unwrap();
    let p = c.params();
    assert_eq!(p.f64("tau", 0.0).unwrap(), 0.25);
    assert_eq!(p.f64_list("y", &[]).unwrap(), vec![1.0, 2.0]);
    assert_eq!(p.string("prior", "").unwrap(), "sech");
}

#[test]
fn malformed_overrides_are_rejected() {
    let mut c = parse("experiment = \"fig1-levelsets\"");
    assert_eq!(c.set_override("tau").unwrap_err().exit_code(), 2);
    assert_eq!(c.set_override("=3").unwrap_err().exit_code(), 2);
}

#[test]
fn violations_name_the_source_of_the_value() {
    let mut c = parse("experiment = \"fig1-levelsets\"\ntau = -1\n");
    let msg = config_error(validate(&c).err().unwrap());
    assert_eq!(msg, "key `tau` (line 2): tau must be positive");
    c.set_override("tau=0").unwrap();
    let msg = config_error(validate(&c).err().unwrap());
    assert_eq!(msg, "key `tau` (override): tau must be positive");
}

#[test]
fn wrong_types_are_config_errors() {
    let c = parse("experiment = \"fig1-levelsets\"\ntau = \"one\"\n");
    let msg = config_error(validate(&c).err().unwrap());
    assert!(msg.starts_with("key `tau` (line 2)"), "{msg}");
}

#[test]
fn domain_errors_from_the_library_are_config_errors() {
    let c = parse("experiment = \"alg1-map\"\nc = 0.5\n");
    let msg = config_error(validate(&c).err().unwrap());
    assert!(msg.contains("c ≥ 1"), "{msg}");
    let c = parse("experiment = \"alg1-map\"\ntau = 5\nlambda = 1\n");
    assert_eq!(validate(&c).err().unwrap().exit_code(), 2);
}

#[test]
fn theorem1_sweep_rejects_priors_without_a_third_derivative_bound() {
    let c = parse("experiment = \"theorem1-sweep\"\npriors = [\"sech\", \"quartic\"]\n");
    let msg = config_error(validate(&c).err().unwrap());
    assert!(msg.contains("quartic"), "{msg}");
}

#[test]
fn prior_keys_build_every_family() {
    for extra in [
        "prior = \"gaussian\"\nprior_mean = [0, 0]\nprior_variances = [1, 2]",
        "prior = \"gaussian\"\nprior_mean = [0, 0]\nprior_eigenvalues = [1, 2]\nprior_eigenvectors = [[0, 1], [1, 0]]",
        "prior = \"logistic\"\ny = [1]",
        "prior = \"embedded\"\nprior_base = \"logistic\"\ny = [1, 2, 3]",
    ] {
        let c = parse(&format!("experiment = \"cold-diffusion-schedule\"\n{extra}\n"));
        validate(&c).unwrap_or_else(|e| panic!("{extra}: {e}"));
    }
    let c = parse("experiment = \"cold-diffusion-schedule\"\nprior = \"cauchy\"\n");
    assert!(config_error(validate(&c).err().unwrap()).contains("unknown prior `cauchy`"));
}

#[test]
fn output_dir_precedence() {
    let c = parse("experiment = \"fig1-levelsets\"\noutput_dir = \"from-file\"\n");
    assert_eq!(resolve_output_dir(&c, Some(Path::new("flag"))).unwrap(), Path::new("flag"));
    assert_eq!(resolve_output_dir(&c, None).unwrap(), Path::new("from-file"));
}

#[test]
fn config_json_round_trips_values() {
    let c = parse("experiment = \"fig1-levelsets\"\nsigma_sq = [0, 1]\n");
    let json = c.to_json();
    assert_eq!(json["experiment"], "fig1-levelsets");
    assert_eq!(json["sigma_sq"], serde_json::json!([0, 1]));
}
