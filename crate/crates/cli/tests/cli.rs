use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn file(name: &str, body: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    fs::write(&path, body).unwrap();
    path
}

fn spnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spnorm")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn lower(v: &Value) -> f64 {
    v["records"][0]["lower"].as_f64().unwrap()
}

#[test]
fn norm_of_identity_is_one() {
    let id = file("id.json", r#"{"coeffs": [[[1, 0, 0, 1]]]}"#);
    let v = json(&spnorm(&["norm", "full:2", id.to_str().unwrap(), "1"]));
    assert!((lower(&v) - 1.0).abs() < 1e-12);
    assert_eq!(v["command"], "norm");
    assert_eq!(v["pass"], true);
    assert_eq!(spnorm(&["norm", "full:2", id.to_str().unwrap(), "2"]).status.code(), Some(2));
}

#[test]
fn sup_exponent_matches_the_matrix_norm() {
    let u = file("u.json", r#"{"space": "full:2", "coeffs": [[[1,0,0,1],[0,1,0,0]],[[0,0,1,0],[2,0,0,[0,1]]]]}"#);
    let path = u.to_str().unwrap();
    let n = lower(&json(&spnorm(&["norm", "full:2", path])));
    let v = json(&spnorm(&["vsnorm", path, "--p", "inf"]));
    assert!((lower(&v) - n).abs() < 1e-10 * n, "{v}");
    let two = json(&spnorm(&["vsnorm", path, "--p", "2"]));
    assert!(lower(&two) >= n * (1.0 - 1e-9));
}

#[test]
fn bad_inputs_exit_with_two() {
    let broken = file("broken.json", "{ not json");
    for args in [
        vec!["norm", "full:2", broken.to_str().unwrap()],
        vec!["norm", "nospace:2", broken.to_str().unwrap()],
        vec!["norm", "full:2", "/nonexistent/file.json"],
        vec!["suite", "nosuchsuite"],
        vec!["interp", "schatten:2", broken.to_str().unwrap()],
    ] {
        let out = spnorm(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn config_file_overrides_flags() {
    let cfg = file("cfg.json", r#"{"seed": 9, "restarts": 1}"#);
    let id = file("id2.json", r#"{"coeffs": [[[1, 0, 0, 1]]]}"#);
    let v = json(&spnorm(&["--config", cfg.to_str().unwrap(), "--seed", "1", "norm", "full:2", id.to_str().unwrap()]));
    assert_eq!(v["seed"], 9);
    assert_eq!(v["config"]["restarts"], 1);
    let typo = file("typo.json", r#"{"sead": 9}"#);
    assert_eq!(spnorm(&["--config", typo.to_str().unwrap(), "norm", "full:2", id.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn suite_reports_are_reproducible() {
    let a = spnorm(&["suite", "hs-oh", "--seed", "5"]);
    let b = spnorm(&["suite", "hs-oh", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["records"].as_array().unwrap().len(), 20);
    assert!(v["records"][0].get("runtime").is_none());
}

#[test]
fn csv_output() {
    let out = spnorm(&["suite", "hs-oh", "--out", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# spnorm "));
    assert_eq!(lines.next().unwrap(), "claim,target,lower,upper,seed,pass");
    assert_eq!(lines.count(), 20);
}

#[test]
fn other_commands() {
    let t = file("t.json", r#"{"coeffs": [[[[1]], [[0]]], [[[0]], [[1]]]]}"#);
    let v = json(&spnorm(&["haagerup", "column:2", "row:2", t.to_str().unwrap()]));
    assert!((lower(&v) - 1.0).abs() < 1e-6 && (v["records"][0]["upper"].as_f64().unwrap() - 1.0).abs() < 1e-6, "{v}");
    let x = file("x.json", "[3, 4]");
    let v = json(&spnorm(&["interp", "row-column:1:2", x.to_str().unwrap()]));
    assert!(lower(&v) <= 5.0 * (1.0 + 1e-9) && lower(&v) > 4.0, "{v}");
    let m = file("map.json", r#"{"domain": "oh:2", "codomain": "oh:3", "action": [[1, 0], [0, 1], [0, 0]]}"#);
    let v = json(&spnorm(&["pisum", m.to_str().unwrap(), "--m-max", "4"]));
    let (lo, up) = (lower(&v), v["records"][0]["upper"].as_f64().unwrap());
    assert!(lo <= up * (1.0 + 1e-9) && (up - 2f64.sqrt()).abs() < 1e-9, "{v}");
}
