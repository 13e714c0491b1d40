//! The `eisfam` binary end to end: exit codes, JSON shape and determinism.

use std::process::{Command, Output};

fn eisfam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eisfam")).args(args).env_remove("EISFAM_PRECISION").output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn eis_constant_term() {
    let out = eisfam(&["eis", "--kind", "F", "--k", "1", "--alpha", "1/3", "--beta", "0", "--bound", "3"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["result"]["a0"], "1/6");
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["q_bound"], "3/1");
    assert_eq!(v["result"]["series"]["M"], 3);
}

#[test]
fn dist_check_passes() {
    let out = eisfam(&["dist-check", "--kind", "E", "--k", "3", "--alpha", "1/2", "--beta", "0", "--f", "2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["result"]["rel"]["holds"], true);
    assert_eq!(v["result"]["rel1"]["holds"], true);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["theta-check", "--c", "2", "--r", "2", "--a", "1", "--b", "1", "--m", "5", "--bound", "2"];
    let (a, b) = (eisfam(&args), eisfam(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn padic_zeta_reports_digits_and_target() {
    let out = eisfam(&["padic-zeta", "--c", "2", "--alpha", "1/5", "--j", "1", "--weight", "4", "--check-target"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["result"]["value"]["p"], 5);
    assert_eq!(v["result"]["matches_target"], true);
    assert!(v["result"]["certificate"].as_i64().unwrap() >= 19);
}

#[test]
fn failing_check_exits_nonzero_with_counterexample() {
    // α = 2/5 with c = 3 has c{α} ≥ 1, where the measure moment and the stated target differ
    let out = eisfam(&["padic-zeta", "--c", "3", "--alpha", "2/5", "--j", "1", "--weight", "3", "--check-target"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["pass"], false);
    assert!(v["result"]["target_agreement"].as_i64().unwrap() < 19);
}

#[test]
fn usage_errors_exit_two() {
    let out = eisfam(&["eis", "--kind", "E", "--k", "2", "--alpha", "1/3", "--beta", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not holomorphic"));
    let out = eisfam(&["eis", "--kind", "G", "--k", "2", "--alpha", "1/3", "--beta", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_environment() {
    let dir = std::env::temp_dir().join(format!("eisfam-verbs-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    let report = dir.join("out.json");
    std::fs::write(&cfg, format!("# small run\nprecision = 20\nguard = 4\noutput = {}\n", report.display())).unwrap();
    let out = eisfam(&["--config", cfg.to_str().unwrap(), "rep-check"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["config"]["certified_precision"], 16);
    assert_eq!(v["result"]["holds"], true);

    let out = Command::new(env!("CARGO_BIN_EXE_eisfam")).args(["rep-check"]).env("EISFAM_PRECISION", "30").output().unwrap();
    assert_eq!(json(&out)["config"]["precision"], 30);
    let out = Command::new(env!("CARGO_BIN_EXE_eisfam")).args(["rep-check"]).env("EISFAM_PRECISION", "lots").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn family_and_box_verbs() {
    let out = eisfam(&["family-check", "--c", "2", "--alpha", "1/5", "--beta", "0", "--j", "1", "--k", "3", "--bound", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let out = eisfam(&["box-integral", "--family", "--c", "2", "--j", "1", "--k", "4", "--a", "1", "--b", "0", "--r", "5", "--bound", "1"]);
    assert!(out.status.success());
    let out = eisfam(&["box-integral", "--kind", "E", "--k", "3", "--a", "1", "--b", "0", "--r", "4", "--bound", "1"]);
    assert!(out.status.success());
    let out = eisfam(&["family-eval", "--c", "2", "--alpha", "1/5", "--beta", "0", "--j", "1", "--weight", "3", "--bound", "1"]);
    assert!(out.status.success());
    assert!(json(&out)["result"]["series"]["coeffs"].as_array().unwrap().len() > 1);
}

#[test]
fn cocycle_and_galois_verbs() {
    let out = eisfam(&["cocycle-check", "--j", "1"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["pass"], true);
    let out = eisfam(&["galois-check", "--kind", "F", "--k", "3", "--alpha", "1/4", "--beta", "1/3", "--d", "5"]);
    assert!(out.status.success());
}

#[test]
fn acceptance_subset_prints_lines() {
    let out = eisfam(&["acceptance", "--suite", "2,7"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.lines().filter(|l| l.starts_with("criterion ")).count() == 2);
    assert_eq!(json(&out)["result"]["criteria"].as_array().unwrap().len(), 2);
}
