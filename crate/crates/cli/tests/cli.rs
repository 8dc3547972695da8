//! End-to-end runs of the binary: artifact schemas, determinism, exit
//! codes, and the config round-trip through report.json.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spde_hmm::config::RunConfig;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spde-hmm"))
}

fn run(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg_path = dir.join("run.cfg");
    fs::write(&cfg_path, config).unwrap();
    let out_dir = dir.join("out");
    binary()
        .args(args)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .arg("--threads")
        .arg("2")
        .env_remove("SPDE_HMM_SEED")
        .output()
        .unwrap()
}

const SMALL_SIM: &str = "\
basis.n_modes = 8
scheme = hmm
epsilon = 0.25
dt = 0.125
tau = 0.1
Ma = 2
T = 0.5
seed = 11
";

#[test]
fn simulate_is_reproducible_without_hidden_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate"], SMALL_SIM, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = fs::read(dir.path().join("out/trajectory.csv")).unwrap();
    let manifest = fs::read(dir.path().join("out/seed_manifest.json")).unwrap();
    // wipe the output directory and rerun: artifacts must be byte-identical
    fs::remove_dir_all(dir.path().join("out")).unwrap();
    let out = run(&["simulate"], SMALL_SIM, dir.path());
    assert!(out.status.success());
    let second = fs::read(dir.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(first, second);
    assert_eq!(
        manifest,
        fs::read(dir.path().join("out/seed_manifest.json")).unwrap()
    );
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("time,l2_norm,linf_norm\n"));
    assert_eq!(text.lines().count(), 1 + 4 + 1); // header + T/dt + initial
}

#[test]
fn seed_precedence_flag_beats_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    fs::write(&cfg_path, SMALL_SIM).unwrap();
    let run_with = |out_name: &str, seed_flag: Option<&str>, env: Option<&str>| {
        let mut cmd = binary();
        cmd.arg("simulate")
            .arg("--config")
            .arg(&cfg_path)
            .arg("--out")
            .arg(dir.path().join(out_name));
        if let Some(s) = seed_flag {
            cmd.arg("--seed").arg(s);
        }
        match env {
            Some(v) => cmd.env("SPDE_HMM_SEED", v),
            None => cmd.env_remove("SPDE_HMM_SEED"),
        };
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(dir.path().join(out_name).join("trajectory.csv")).unwrap()
    };
    let flag_and_env = run_with("a", Some("99"), Some("55"));
    let flag_only = run_with("b", Some("99"), None);
    let env_only = run_with("c", None, Some("55"));
    let config_only = run_with("d", None, None);
    assert_eq!(flag_and_env, flag_only, "--seed must override the env var");
    assert_ne!(flag_only, env_only);
    assert_ne!(env_only, config_only, "env var must override the config");
}

#[test]
fn mixing_sums_csv_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "mixing.m = 1\nmixing.ma = 1\nmixing.tau = 0.1\nmixing.c = 1\n";
    let out = run(&["mixing-sums"], cfg, dir.path());
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("out/mixing_sums.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "m,ma,tau,c,r1,r2");
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    let r1: f64 = fields[4].parse().unwrap();
    let r2: f64 = fields[5].parse().unwrap();
    assert!((r1 - (-0.1f64).exp()).abs() < 1e-12);
    assert_eq!(r2, 0.0);
}

#[test]
fn invalid_config_exits_2_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate"], "epsilon = 2.5\nbogus = 1\n", dir.path());
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"], "config");
    let diags = record["diagnostics"].as_array().unwrap();
    assert!(diags.iter().any(|d| d["field"] == "epsilon"));
    assert!(diags.iter().any(|d| d["field"] == "bogus"));
}

#[test]
fn statistics_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
basis.n_modes = 8
fine_divisor = 8
experiment.epsilons = 0.5,0.25
experiment.replicas = 1
experiment.snapshots = 4
";
    let out = run(&["rate-strong"], cfg, dir.path());
    assert_eq!(out.status.code(), Some(3));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"], "statistics");
}

const SMALL_RATE: &str = "\
basis.n_modes = 8
fine_divisor = 8
slow.covariance = powerlaw(1)
fast.covariance = powerlaw(1)
seed = 23
experiment.epsilons = 0.5,0.25
experiment.replicas = 8
experiment.snapshots = 4
";

#[test]
fn rate_strong_artifacts_and_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["rate-strong"], SMALL_RATE, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for artifact in ["report.json", "errors.csv", "rates.csv", "seed_manifest.json"] {
        assert!(dir.path().join("out").join(artifact).exists(), "{artifact}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    // the embedded snapshot re-parses to the same configuration
    let snapshot = report["config_snapshot"].as_str().unwrap();
    let reparsed = RunConfig::parse(snapshot).unwrap();
    let original = RunConfig::parse(SMALL_RATE).unwrap();
    assert_eq!(reparsed, original);
    assert_eq!(report["seed_manifest"]["master_seed"], 23);

    let rates = fs::read_to_string(dir.path().join("out/rates.csv")).unwrap();
    assert!(rates.starts_with("experiment,slope,se,points,excluded\n"));
    assert_eq!(rates.lines().count(), 2);
    let errors = fs::read_to_string(dir.path().join("out/errors.csv")).unwrap();
    assert!(errors.starts_with("parameter,time,strong_error,weak_error\n"));
    assert_eq!(errors.lines().count(), 1 + 2 * 4); // 2 epsilons x 4 snapshots

    // byte-identical rerun
    let report_bytes = fs::read(dir.path().join("out/report.json")).unwrap();
    fs::remove_dir_all(dir.path().join("out")).unwrap();
    let out = run(&["rate-strong"], SMALL_RATE, dir.path());
    assert!(out.status.success());
    assert_eq!(report_bytes, fs::read(dir.path().join("out/report.json")).unwrap());
}

#[test]
fn rate_weak_reports_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["rate-weak"], SMALL_RATE, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("verdict"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert!(report["rows"][0]["weak_error"].is_number());
}

#[test]
fn hmm_sweep_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
basis.n_modes = 8
dt = 0.125
tau = 0.1
T = 0.5
seed = 5
experiment.ma_list = 2,8
experiment.m_over_ma = 2
experiment.replicas = 8
nonlinearity.family = quadratic_y
fast.covariance = white
";
    let out = run(&["hmm-sweep"], cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["parameter_name"], "averaging_window");
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn poisson_check_emits_bound_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
basis.n_modes = 4
fast.covariance = white
nonlinearity.family = affine_y
nonlinearity.g = zero
init.x0 = zero
init.y0 = e(1)
poisson.panels = 12
poisson.gl_order = 8
poisson.hermite_order = 12
poisson.scales = 0,1,2
";
    let out = run(&["poisson-check"], cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/poisson_bounds.csv")).unwrap();
    assert!(csv.starts_with("bound_id,scale,value,bound,ratio\n"));
    // 3 growth scales + 4 dual-norm modes
    assert_eq!(csv.lines().count(), 1 + 3 + 4);
    assert!(csv.contains("growth_in_y"));
    assert!(csv.contains("dual_norm_in_theta"));
}

#[test]
fn invariant_check_runs_small() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
basis.n_modes = 4
fast.covariance = white
tau = 0.1
Ma = 2
experiment.replicas = 4000
seed = 3
";
    let out = run(&["invariant-check"], cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/invariant_check.csv")).unwrap();
    assert!(csv.starts_with("mode,law,closed_form,mc_estimate,se,deviation_se\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
}
