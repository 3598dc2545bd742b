use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaos-bounds"))
        .args(args)
        .env_remove("CHAOS_BOUNDS_THREADS")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const PERMUTATION: &str = r#"{"d": 2, "n": 2, "entries": [0, 1, 1, 0]}"#;

#[test]
fn gaussian_estimate_of_permutation_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "perm.json", PERMUTATION);
    let out = run(&["estimate", "--tensor", &t, "--form", "gaussian", "--p", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let total = v["breakdowns"][0]["total"].as_f64().unwrap();
    // 4 ||a||_op + 2 ||a||_HS with ||a||_op = 1 and ||a||_HS = sqrt 2.
    assert!((total - (4.0 + 2.0 * 2f64.sqrt())).abs() < 1e-9, "{total}");
    assert_eq!(v["config"]["command"], "estimate");
}

#[test]
fn malformed_tensor_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(
        dir.path(),
        "bad.json",
        r#"{"d": 2, "n": 2, "entris": [1, 2, 3, 4]}"#,
    );
    let out = run(&["estimate", "--tensor", &t]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("entries"));

    let t = write(
        dir.path(),
        "short.json",
        r#"{"d": 2, "n": 2, "entries": [1, 2, 3]}"#,
    );
    assert_eq!(run(&["estimate", "--tensor", &t]).status.code(), Some(2));
}

#[test]
fn order_two_form_rejects_other_orders() {
    let out = run(&["estimate", "--random", "3,2,0", "--form", "d2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn norms_of_a_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "perm.json", PERMUTATION);
    let all = json(&run(&["norms", "--tensor", &t, "--all"]));
    assert_eq!(all["norms"].as_array().unwrap().len(), 2);

    let op = json(&run(&["norms", "--tensor", &t, "1|2"]));
    let op = op["norms"].as_array().unwrap();
    assert_eq!(op.len(), 1);
    assert!((op[0]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let hs = json(&run(&["norms", "--tensor", &t, "1,2"]));
    assert!((hs["norms"][0]["value"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);

    assert_eq!(
        run(&["norms", "--tensor", &t, "1|3"]).status.code(),
        Some(2)
    );
}

#[test]
fn invalid_sampling_arguments_exit_2() {
    let out = run(&["verify-moments", "--random", "2,3,0", "--samples", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "verify-tail",
        "--random",
        "1,2,0",
        "--thresholds",
        "2,1",
        "--samples",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("increasing"));
}

#[test]
fn huge_constant_dominates_the_tail() {
    let out = run(&[
        "verify-tail",
        "--random",
        "1,1,0",
        "--law",
        "exponential",
        "--Cprime",
        "1e6",
        "--samples",
        "20000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["report"]["dominates"], true);
    assert_eq!(v["config"]["Cprime"], 1e6);
}

#[test]
fn echoed_config_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let first_s = first.to_str().unwrap();
    let out = run(&[
        "verify-decoupling",
        "--random",
        "2,4,7",
        "--p",
        "2,3",
        "--samples",
        "30000",
        "--threads",
        "2",
        "--out",
        first_s,
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(4)));
    let again = dir.path().join("again.json");
    run(&[
        "verify-decoupling",
        "--config",
        first_s,
        "--threads",
        "3",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&again).unwrap()
    );
    let cfg: Value = serde_json::from_slice(&std::fs::read(&first).unwrap()).unwrap();
    assert!(cfg["config"].get("threads").is_none());
    assert_eq!(cfg["config"]["samples"], 30000);
}

#[test]
fn csv_output_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cells.csv");
    let out = run(&[
        "verify-moments",
        "--random",
        "2,3,1",
        "--law",
        "gaussian",
        "--p",
        "2,4",
        "--samples",
        "20000",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(4)));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("p,estimate,empirical"));
}
