use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn udual(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_udual")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn validate_det1_is_clean() {
    let path = fixture("det1.json");
    let out = udual(&["validate", "--scenario", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
    assert_eq!(report["verdict"], "pass");
}

#[test]
fn bin1_primal_value() {
    let path = fixture("bin1.json");
    let out = udual(&["solve-primal", "--scenario", path.to_str().unwrap(), "--x", "1", "--q=", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let value = report["computations"][0]["solution"]["value"].as_f64().unwrap();
    let closed = 0.5 * (9.0f64 / 8.0).ln();
    assert!((value - closed).abs() < 1e-9, "{value}");
    assert!((value - 0.05889).abs() < 1e-4);
}

#[test]
fn tri1_verify_passes() {
    let path = fixture("tri1.json");
    let out = udual(&["verify", "--scenario", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = json(&out);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    assert!(checks.iter().all(|c| c["passed"] == true));
    assert_eq!(report["seed"], 42);
}

#[test]
fn reports_are_deterministic() {
    let path = fixture("tri1.json");
    let p = path.to_str().unwrap();
    let a = udual(&["verify", "--scenario", p, "--format", "json"]);
    let b = udual(&["verify", "--scenario", p, "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
    let c = udual(&["verify", "--scenario", p, "--format", "json", "--seed", "7"]);
    assert_eq!(json(&c)["seed"], 7);
}

#[test]
fn digest_ignores_key_order() {
    let text = std::fs::read_to_string(fixture("bin1.json")).unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    // Rebuild the top-level object with keys in reverse order.
    let obj = value.as_object().unwrap();
    let mut parts: Vec<String> = obj.iter().map(|(k, v)| format!("{:?}:{}", k, v)).collect();
    parts.reverse();
    let reordered = format!("{{{}}}", parts.join(","));
    assert!(!reordered.starts_with(&text[..10]));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reordered.json");
    std::fs::write(&path, reordered).unwrap();
    let a = json(&udual(&["validate", "--scenario", fixture("bin1.json").to_str().unwrap(), "--format", "json"]));
    let b = json(&udual(&["validate", "--scenario", path.to_str().unwrap(), "--format", "json"]));
    assert_eq!(a["scenario"]["digest"], b["scenario"]["digest"]);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"tree\": { \"prices\": [] }, \"clock_bound\": 1, \"oops\": 3 }").unwrap();
    let out = udual(&["validate", "--scenario", bad.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    let report = json(&out);
    assert_eq!(report["error"]["kind"], "parse");
    assert!(report["error"]["message"].as_str().unwrap().contains("line"));

    let missing = dir.path().join("missing.json");
    let out = udual(&["validate", "--scenario", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let tri = fixture("tri1.json");
    let out = udual(&["solve-primal", "--scenario", tri.to_str().unwrap(), "--x", "-1", "--q", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = udual(&["solve-primal", "--scenario", tri.to_str().unwrap(), "--x", "1", "--q", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn violations_exit_1() {
    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(fixture("bin1.json")).unwrap()).unwrap();
    value["tree"]["children"][0]["prob"] = Value::from(0.2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("skewed.json");
    std::fs::write(&path, value.to_string()).unwrap();
    let out = udual(&["validate", "--scenario", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["violations"][0]["invariant"], "branch_probabilities");
}

#[test]
fn arbitrage_is_an_input_error() {
    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(fixture("bin1.json")).unwrap()).unwrap();
    for child in value["tree"]["children"].as_array_mut().unwrap() {
        child["prices"] = Value::from(vec![3.0]);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("arb.json");
    std::fs::write(&path, value.to_string()).unwrap();
    let out = udual(&["solve-primal", "--scenario", path.to_str().unwrap(), "--x", "1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "arbitrage");
}

#[test]
fn grids_and_formats() {
    let tri = fixture("tri1.json");
    let p = tri.to_str().unwrap();
    let out = udual(&["w", "--scenario", p, "--grid", "0.5,1,2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("section,name,key,value,tolerance,status"));

    let out = udual(&["wtilde", "--scenario", p, "--format", "json"]);
    let report = json(&out);
    assert_eq!(report["computations"].as_array().unwrap().len(), 3);
    assert!(report.get("timings").is_none());

    let out = udual(&["cones", "--scenario", p, "--format", "json"]);
    let report = json(&out);
    assert_eq!(report["polytope"]["vertices"], 2);
    assert_eq!(report["cones"]["k_rays"].as_array().unwrap().len(), 2);
}
