//! End-to-end tests of the command-line front door: exit codes, schema
//! validation, report structure and worker-count reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_driftcert")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn driftcert")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

const PASSING_VERIFY: &str = r#"
master_seed = 42

[kernel]
type = "birth-death"
d = 2.0

[drift]
condition = "phi-subgeometric"
v = { shift = 1.0, exponent = 8.0 }
phi = { family = "polynomial", alpha = 0.25, c = 1.0 }
b = 1.0
c_max = 0.0

[grid]
kind = "lattice-range"
lo = 0
hi = 100
"#;

#[test]
fn calibrated_chain_verifies_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "verify.toml", PASSING_VERIFY);
    let out = run(&["verify-drift", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["outcome"], "Pass");
    assert_eq!(report["result"]["mode"], "Exact");
    assert_eq!(report["config"]["master_seed"], 42);
    assert_eq!(report["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn failing_drift_exits_two_not_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fail.toml",
        r#"
master_seed = 1
[kernel]
type = "identity"
[drift]
condition = "one-step-geometric"
v = { shift = 1.0, exponent = 2.0 }
beta = 0.5
b = 8.0
c_max = 3.0
[grid]
kind = "lattice-range"
lo = 0
hi = 20
"#,
    );
    let out = run(&["verify-drift", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["outcome"], "Fail");
}

#[test]
fn out_of_range_beta_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        r#"
master_seed = 1
[kernel]
type = "identity"
[drift]
condition = "one-step-geometric"
v = { shift = 1.0, exponent = 2.0 }
beta = 1.5
b = 1.0
c_max = 3.0
[grid]
kind = "lattice-range"
lo = 0
hi = 10
"#,
    );
    let out = run(&["verify-drift", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta") && err.contains("1.5"), "stderr: {err}");
}

#[test]
fn master_seed_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "noseed.toml", "[kernel]\ntype = \"identity\"\n");
    let out = run(&["verify-drift", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("master_seed"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "unk.toml", "master_seed = 1\nbogus_key = 3\n");
    let out = run(&["verify-drift", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));
}

const DOMPROC: &str = r#"
master_seed = 9
[kernel]
type = "dominating"
beta = 0.1
kappa = 1.0
n_star = { family = "power", gamma = 0.0 }
[domproc]
case = "power-moment"
alpha = 0.3
eta = 1.0
z_grid = [10.0, 100.0, 1000.0]
replicates = 1000
cap = 100000
"#;

#[test]
fn result_payload_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dom.toml", DOMPROC);
    let results: Vec<serde_json::Value> = ["1", "4"]
        .iter()
        .map(|w| {
            let out = run(
                &["domproc-experiment", "--config", &cfg, "--workers", w],
                dir.path(),
            );
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
            report["result"].clone()
        })
        .collect();
    assert_eq!(
        serde_json::to_string(&results[0]).unwrap(),
        serde_json::to_string(&results[1]).unwrap()
    );
}

#[test]
fn csv_matrix_drives_the_norm_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "swap.csv", "a,b\n0,1\n1,0\n");
    let cfg = write(
        dir.path(),
        "wnorm.toml",
        r#"
master_seed = 7
[kernel]
type = "matrix"
path = "swap.csv"
[wnorm]
v = { shift = 1.0, exponent = 1.0 }
w = { shift = 1.0, exponent = 1.0 }
n_max = 100
pairs = [[0, 1]]
"#,
    );
    // the periodic swap chain never stabilizes: FAIL, exit 2
    let out = run(
        &["wnorm-diagnostic", "--config", &cfg, "--format", "csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let csv = String::from_utf8_lossy(&out.stdout);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,x_other,sup_ratio,stabilized"));
    assert!(lines.next().unwrap().ends_with("false"));
}

#[test]
fn non_stochastic_matrix_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "a,b\n0.5,0.4\n0,1\n");
    let cfg = write(
        dir.path(),
        "wnorm.toml",
        r#"
master_seed = 7
[kernel]
type = "matrix"
path = "bad.csv"
[wnorm]
v = { shift = 1.0, exponent = 1.0 }
w = { shift = 1.0, exponent = 1.0 }
n_max = 10
pairs = [[0, 1]]
"#,
    );
    let out = run(&["wnorm-diagnostic", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plan_and_tameness_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let plan_cfg = r#"
master_seed = 5
[plan]
rate = { family = "linear" }
v = { shift = 1.0, exponent = 2.0 }
w = { shift = 1.0, exponent = 1.0 }
c_const = 1.0
beta = 0.4
beta_prime = 0.5
b = 10.0
delta = 0.9
[grid]
kind = "scalar-log"
lo = 10.0
hi = 100000.0
per_decade = 3
"#;
    let cfg = write(dir.path(), "plan.toml", plan_cfg);
    let out = run(
        &["plan-subsample", "--config", &cfg, "--format", "csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8_lossy(&out.stdout);
    assert!(csv.starts_with("state,n,w,in_small_set"));

    let out = run(&["classify-tame", "--config", &cfg], dir.path());
    // schedule n ~ (C/beta) V/W = 2.5 (x+1) vs W^0.9 = (x+1)^0.9: not tame
    assert_eq!(out.status.code(), Some(2));

    let tame_cfg = write(
        dir.path(),
        "tame.toml",
        r#"
master_seed = 5
[tame]
alpha = 0.25
v = { shift = 1.0, exponent = 1.0 }
b = 1.0
"#,
    );
    let out = run(&["construct-tame", "--config", &tame_cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["result"]["verdict"]["is_tame"], true);
}

#[test]
fn deterministic_return_moment_on_a_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cycle.toml",
        r#"
master_seed = 11
[kernel]
type = "cycle"
period = 3
[moment]
rate = { family = "polynomial", alpha = 0.5 }
x0 = 0.0
c_max = 0.0
replicates = 50
cap = 100
"#,
    );
    let out = run(
        &["estimate-moment", "--config", &cfg, "--out", "est.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("est.json")).unwrap()).unwrap();
    // R(t) = t and the cycle returns in exactly 3 steps
    let mean = report["result"]["truncated"]["mean"].as_f64().unwrap();
    assert!((mean - 3.0).abs() < 1e-9);
}
