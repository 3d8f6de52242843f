use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn instance(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances");
    root.join(name).display().to_string()
}

fn ccp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccp")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    assert_eq!(text.trim().lines().count(), 1, "{text}");
    serde_json::from_str(text.trim()).expect("stderr is one JSON object")
}

#[test]
fn solve_three_point_shift() {
    let out = ccp(&["solve", "--instance", &instance("three_point_shift.json"), "--method", "alsox"]);
    assert_eq!(out.status.code(), Some(0));
    let r = stdout_json(&out);
    let v = r["objective"].as_f64().unwrap();
    assert!((2.0..=2.01).contains(&v), "{v}");
    assert_eq!(r["config"]["delta1"].as_f64(), Some(1e-2));
    assert!(r["backend"].is_string() && r["x_star"].is_array());
}

#[test]
fn solve_without_feasible_budget_exits_two() {
    let out = ccp(&["solve", "--instance", &instance("divergent_bisection.json"), "--method", "alsox"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["error"], "NoFeasibleT");
}

#[test]
fn usage_errors_exit_one() {
    let out = ccp(&["solve", "--instance", &instance("three_point_shift.json"), "--method", "nosuch"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_error(&out)["message"].as_str().unwrap().contains("nosuch"));
    let out = ccp(&["solve", "--method", "alsox"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_error(&out)["error"], "UsageError");
    let out = ccp(&["solve", "--instance", "/no/such/file.json", "--method", "alsox"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_error(&out)["error"], "IoError");
}

#[test]
fn oracle_cap_exits_three() {
    let out = ccp(&["oracle", "--instance", &instance("symmetric_triangle.json"), "--cap", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_error(&out)["error"], "CapExceeded");
}

#[test]
fn oracle_with_nullspace_verdict() {
    let out = ccp(&["oracle", "--instance", &instance("equality_triangle.json"), "--nullspace"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["nullspace"]["verdict"], "holds");
    assert!(doc["report"]["objective"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn solve_csv_has_six_significant_digits() {
    let out = ccp(&["solve", "--instance", &instance("three_point_shift.json"), "--method", "cvar", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("method,objective,feasible"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[..3], ["cvar", "2.66667", "true"]);
}

#[test]
fn robust_document_and_flags_agree() {
    let doc = ccp(&["solve", "--instance", &instance("three_point_shift_robust.json"), "--method", "alsox"]);
    let flags = ccp(&[
        "solve",
        "--instance",
        &instance("three_point_shift.json"),
        "--method",
        "alsox",
        "--theta",
        "0.1",
        "--norm",
        "linf",
    ]);
    let (a, b) = (stdout_json(&doc), stdout_json(&flags));
    assert_eq!(a["method"], "wc_alsox");
    assert!((a["objective"].as_f64().unwrap() - b["objective"].as_f64().unwrap()).abs() < 1e-12);
    assert!(a["objective"].as_f64().unwrap() > 2.0);
}

#[test]
fn elliptical_instances_solve() {
    let out = ccp(&["solve", "--instance", &instance("gaussian_plane.json"), "--method", "oracle"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((stdout_json(&out)["objective"].as_f64().unwrap() + 1.55432).abs() < 1e-3);
    let out = ccp(&["solve", "--instance", &instance("gaussian_plane.json"), "--method", "cvar"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_triangle() {
    let out = ccp(&["compare", "--instance", &instance("symmetric_triangle.json"), "--delta1", "1e-3", "--delta2", "1e-3"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = stdout_json(&out);
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let improvement = |m: &str| rows.iter().find(|r| r["method"] == m).unwrap()["improvement_pct"].as_f64();
    assert!((improvement("alsoxplus").unwrap() - 25.0).abs() < 0.5);
    assert!(improvement("alsox").unwrap().abs() < 0.5);
    assert!(improvement("cvar").is_none());
    assert_eq!(rep["consistency"]["holds"], true);
}

#[test]
fn compare_keeps_rows_when_cvar_fails() {
    let out = ccp(&["compare", "--instance", &instance("divergent_bisection.json"), "--methods", "cvar,oracle"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = stdout_json(&out);
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["error"].is_string());
    assert!(rows[1].get("improvement_pct").is_none());
}

#[test]
fn compare_generated_linear_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lin.json");
    let path = path.to_str().unwrap();
    let out = ccp(&["gen", "--family", "linear", "--n", "10", "--N", "100", "--epsilon", "0.1", "--seed", "3", "--out", path]);
    assert_eq!(out.status.code(), Some(0));
    let out = ccp(&["compare", "--instance", path, "--methods", "cvar,alsox"]);
    let rep = stdout_json(&out);
    assert!(rep["rows"][1]["improvement_pct"].as_f64().unwrap() >= 0.0);
}

#[test]
fn gen_is_deterministic_and_in_range() {
    let args = ["gen", "--family", "linear", "--n", "20", "--N", "400", "--epsilon", "0.05", "--seed", "1"];
    let a = ccp(&args);
    let b = ccp(&args);
    assert_eq!(a.stdout, b.stdout);
    let doc = stdout_json(&a);
    let d = doc["constraints"]["D"].as_array().unwrap();
    assert_eq!(d.len(), 400);
    let entries = d.iter().flat_map(|k| k[0].as_array().unwrap()).map(|v| v.as_f64().unwrap());
    assert!(entries.into_iter().all(|v| (1.0..=50.0).contains(&v)));
    let nl = stdout_json(&ccp(&["gen", "--family", "nonlinear", "--n", "4", "--N", "10", "--epsilon", "0.1"]));
    assert_eq!(nl["constraints"]["power"].as_f64(), Some(2.0));
}

#[test]
fn bench_is_deterministic_except_time() {
    let args = ["bench", "--family", "linear", "--n", "4", "--N", "20", "--epsilon", "0.1", "--seeds", "1,2"];
    let strip = |out: Output| -> Vec<String> {
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .map(|l| {
                let mut cells: Vec<&str> = l.split(',').collect();
                cells.remove(9);
                cells.join(",")
            })
            .collect()
    };
    let a = strip(ccp(&args));
    let b = strip(Command::new(env!("CARGO_BIN_EXE_ccp")).args(args).env("CCP_SOLVE_THREADS", "1").output().unwrap());
    assert_eq!(a, b);
    assert_eq!(a.len(), 1 + 2 * 3);
    assert!(a[0].starts_with("family,n,N,epsilon,seed,method"));
}
