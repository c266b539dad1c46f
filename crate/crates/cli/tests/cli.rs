use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tweedie_prox_cli::output::sha256_hex;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tweedie-prox"));
    cmd.env_remove("PROX_OUT_DIR");
    cmd
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FIG1: &str = "experiment = \"fig1-levelsets\"\nresolution = 11\n";

#[test]
fn list_prints_every_experiment() {
    let o = bin().arg("list").output().unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 8);
    let o = bin().args(["list", "--json", "fig"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn validate_accepts_and_rejects() {
    let tmp = TempDir::new().unwrap();
    let good = write(tmp.path(), "good.toml", FIG1);
    let o = bin().args(["validate", "--config"]).arg(&good).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let bad = write(tmp.path(), "bad.toml", "experiment = \"fig1-levelsets\"\nwindow = 3\n");
    let o = bin().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`window` (line 2)"), "{}", stderr(&o));

    let o = bin().args(["validate", "--config"]).arg(&good).arg("tau=-1").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("key `tau` (override)"));
    assert!(!tmp.path().join("prox-out").exists());
}

#[test]
fn missing_config_file_is_an_io_error() {
    let o = bin().args(["validate", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn run_writes_artifacts_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "fig1.toml", FIG1);
    let out = tmp.path().join("out");
    let o = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).lines().filter(|l| l.starts_with("PASS ")).count() == 3);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "fig1-levelsets");
    assert_eq!(manifest["status"], "PASS");
    for entry in manifest["files"].as_array().unwrap() {
        let bytes = fs::read(out.join(entry["path"].as_str().unwrap())).unwrap();
        assert_eq!(entry["sha256"], sha256_hex(&bytes));
        assert_eq!(entry["bytes"], bytes.len());
    }
    assert!(manifest["checks"].as_array().unwrap().iter().all(|c| c["status"] == "PASS"));
}

#[test]
fn failed_check_exits_3_and_is_recorded() {
    // The naive-slope check fails on the default fig2 instance.
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "f.toml", "experiment = \"fig2-comparison\"\nsmoothed_steps = 200\n");
    let out = tmp.path().join("out");
    let o = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL naive_stagnation_slope"));
    assert!(stderr(&o).contains("naive_stagnation_slope"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "FAIL");
    assert!(out.join("fig2_error_naive.csv").exists());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "fig1.toml", FIG1);
    let blocker = write(tmp.path(), "file", "");
    let o = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(blocker.join("sub")).output().unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn env_var_is_the_output_fallback() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "fig1.toml", FIG1);
    let env_dir = tmp.path().join("env-out");
    let o = bin().args(["run", "--config"]).arg(&cfg).env("PROX_OUT_DIR", &env_dir).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env_dir.join("manifest.json").exists());

    let file_dir = tmp.path().join("file-out");
    let cfg = write(tmp.path(), "fig1b.toml", &format!("{FIG1}output_dir = {:?}\n", file_dir.to_str().unwrap()));
    let o = bin().args(["run", "--config"]).arg(&cfg).env("PROX_OUT_DIR", &env_dir).output().unwrap();
    assert!(o.status.success());
    assert!(file_dir.join("manifest.json").exists());

    let o = bin().args(["run", "--config"]).arg(&cfg).current_dir(tmp.path()).output().unwrap();
    assert!(o.status.success());
}

#[test]
fn default_output_dir_is_relative() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "fig1.toml", FIG1);
    let o = bin().args(["run", "--config"]).arg(&cfg).current_dir(tmp.path()).output().unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("prox-out/manifest.json").exists());
}

#[test]
fn seed_flag_and_byte_identical_reruns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "pde.toml", "experiment = \"pde-suite\"\nprobes = 3\nheat_points = 11\nmax_principle_sigma_sq = [1]\n");
    let run = |dir: &str, seed: &str| {
        let o = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join(dir)).args(["--seed", seed]).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(tmp.path().join(dir).join("pde_conditioning.csv")).unwrap()
    };
    let (a, b, c) = (run("a", "4"), run("b", "4"), run("c", "5"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let manifest = fs::read_to_string(tmp.path().join("a/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 4"));
}

#[test]
fn batch_runs_write_per_config_directories() {
    let tmp = TempDir::new().unwrap();
    let a = write(tmp.path(), "a.toml", FIG1);
    let b = write(tmp.path(), "b.toml", "experiment = \"cold-diffusion-schedule\"\nn_steps = 10\n");
    let out = tmp.path().join("batch");
    let o = bin()
        .args(["run", "--jobs", "2", "--config"])
        .arg(&a)
        .arg("--config")
        .arg(&b)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("a/fig1_levelsets.csv").exists());
    assert!(out.join("b/cold_diffusion.csv").exists());
}

#[test]
fn batch_with_shared_output_dir_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let a = write(tmp.path(), "a.toml", FIG1);
    let o = bin()
        .args(["run", "--config"])
        .arg(&a)
        .arg("--config")
        .arg(&a)
        .env("PROX_OUT_DIR", tmp.path().join("same"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("same").exists());
}

#[test]
fn batch_exit_code_is_the_worst() {
    let tmp = TempDir::new().unwrap();
    let good = write(tmp.path(), "good.toml", FIG1);
    let failing = write(tmp.path(), "fail.toml", "experiment = \"fig2-comparison\"\nsmoothed_steps = 200\n");
    let o = bin()
        .args(["run", "--jobs", "2", "--config"])
        .arg(&good)
        .arg("--config")
        .arg(&failing)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(tmp.path().join("o/good/manifest.json").exists());
}
