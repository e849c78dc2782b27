//! End-to-end tests of the command-line interface: exit codes, report
//! shapes, CSV output, and byte determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rigidity_core::cusp::make_double_watt;
use rigidity_core::fixtures::{make_collinear_chain, make_fourbar, make_triangle};
use rigidity_core::Framework;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigidity"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is valid JSON")
}

fn write_framework(dir: &Path, name: &str, framework: &Framework) -> String {
    let spec = framework.to_spec();
    let text = serde_json::to_string_pretty(&spec).expect("spec serializes");
    fs::write(dir.join(name), text).expect("fixture written");
    name.to_string()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process not killed by signal")
}

#[test]
fn validate_accepts_a_well_formed_file() {
    let dir = tempfile::tempdir().unwrap();
    let name = write_framework(dir.path(), "triangle.json", &make_triangle());
    let out = run(&["validate", &name], dir.path());
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["valid"], serde_json::Value::Bool(true));
    assert_eq!(report["framework"]["vertices"], 3);
    assert_eq!(report["tool"]["name"], "rigidity");
    assert_eq!(report["input"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn validate_rejects_an_edge_to_an_unknown_vertex() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"dimension":2,"vertices":[{"id":"A","coords":[0.0,0.0],"pinned":true},
            {"id":"B","coords":[1.0,0.0],"pinned":false}],
            "edges":[{"u":"A","v":"Z"}]}"#,
    )
    .unwrap();
    let out = run(&["validate", "bad.json"], dir.path());
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("A-Z"), "diagnostic names the edge: {stderr}");
    assert!(stderr.contains("unknown vertex Z"), "stderr: {stderr}");
}

#[test]
fn validate_rejects_a_framework_without_pins() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("unpinned.json"),
        r#"{"dimension":2,"vertices":[{"id":"A","coords":[0.0,0.0],"pinned":false},
            {"id":"B","coords":[1.0,0.0],"pinned":false}],
            "edges":[{"u":"A","v":"B"}]}"#,
    )
    .unwrap();
    let out = run(&["validate", "unpinned.json"], dir.path());
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("insufficient pins"), "stderr: {stderr}");
}

#[test]
fn validate_rejects_unknown_schema_fields() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("extra.json"),
        r#"{"dimension":2,"vertices":[{"id":"A","coords":[0.0,0.0],"pinned":true,"mass":1.0}],
            "edges":[]}"#,
    )
    .unwrap();
    let out = run(&["validate", "extra.json"], dir.path());
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mass"), "diagnostic names the field: {stderr}");
}

#[test]
fn missing_input_file_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["validate", "no_such_file.json"], dir.path());
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn analyze_reports_the_chain_verdict_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let name = write_framework(dir.path(), "chain.json", &make_collinear_chain());
    let out = run(&["analyze", &name, "--max-order", "2"], dir.path());
    let report = stdout_json(&out);
    assert_eq!(report["flex_space_dimension"], 1);
    assert_eq!(report["stress_space_dimension"], 1);
    let verdicts = report["verdicts"].as_array().unwrap();
    assert_eq!(verdicts[0]["verdict"], "flexible");
    assert_eq!(verdicts[1]["verdict"], "rigid");
    assert!(
        verdicts[1]["detail"]
            .as_str()
            .unwrap()
            .contains("stress obstruction"),
        "rigid verdict names its certificate: {}",
        verdicts[1]["detail"]
    );
}

#[test]
fn trace_writes_one_row_per_step_plus_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let name = write_framework(dir.path(), "fourbar.json", &make_fourbar());
    let out = run(
        &["trace", &name, "--steps", "100", "--step", "0.01", "--out", "path.csv"],
        dir.path(),
    );
    let report = stdout_json(&out);
    assert_eq!(report["branch_count"], 1);
    assert_eq!(report["branches"][0]["rows"], 101);
    let csv = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert_eq!(csv.lines().count(), 102, "header plus 101 records");
    assert!(csv.starts_with("t,s,max_abs_D,"));
}

#[test]
fn trace_on_a_rigid_framework_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let name = write_framework(dir.path(), "triangle.json", &make_triangle());
    let out = run(&["trace", &name, "--out", "path.csv"], dir.path());
    assert_eq!(exit_code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no flex direction"), "stderr: {stderr}");
}

#[test]
fn trace_auto_splits_into_two_branches_at_a_degenerate_point() {
    let dir = tempfile::tempdir().unwrap();
    let name = write_framework(dir.path(), "watt.json", &make_double_watt());
    let out = run(
        &["trace", &name, "--steps", "40", "--out", "watt.csv"],
        dir.path(),
    );
    let report = stdout_json(&out);
    assert_eq!(report["branch_count"], 2);
    assert!(dir.path().join("watt.plus.csv").exists());
    assert!(dir.path().join("watt.minus.csv").exists());
}

#[test]
fn order_recovers_a_synthetic_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["order", "--synthetic-alpha", "3.5"], dir.path());
    let report = stdout_json(&out);
    let slope = report["estimate"]["slope"].as_f64().unwrap();
    assert!((slope - 3.5).abs() < 1e-6, "slope = {slope}");
}

#[test]
fn order_from_flex_classifies_the_chain_correctly() {
    let dir = tempfile::tempdir().unwrap();
    let name = write_framework(dir.path(), "chain.json", &make_collinear_chain());
    let out = run(
        &["order", &name, "--from-flex", "1", "--max-order", "3"],
        dir.path(),
    );
    let report = stdout_json(&out);
    let slope = report["estimate"]["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.05, "slope = {slope}");
    let classes = report["classifications"].as_array().unwrap();
    assert_eq!(classes[0]["witnesses_flexibility"], true);
    assert_eq!(classes[1]["witnesses_flexibility"], false);
    assert_eq!(classes[2]["witnesses_flexibility"], false);
}

#[test]
fn order_requires_exactly_one_source() {
    let dir = tempfile::tempdir().unwrap();
    let name = write_framework(dir.path(), "chain.json", &make_collinear_chain());
    let out = run(&["order", &name], dir.path());
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let name = write_framework(dir.path(), "watt.json", &make_double_watt());
    let first = run(&["analyze", &name, "--max-order", "3", "--seed", "11"], dir.path());
    let second = run(&["analyze", &name, "--max-order", "3", "--seed", "11"], dir.path());
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let demo_a = run(&["cusp-demo", "--out-dir", "a", "--seed", "11"], dir.path());
    let demo_b = run(&["cusp-demo", "--out-dir", "b", "--seed", "11"], dir.path());
    assert!(demo_a.status.success());
    let text_a = String::from_utf8(demo_a.stdout).unwrap().replace("a/", "b/");
    let text_b = String::from_utf8(demo_b.stdout).unwrap();
    assert_eq!(text_a, text_b, "reports agree up to the output directory");
    for branch in ["branch_plus.csv", "branch_minus.csv"] {
        let csv_a = fs::read(dir.path().join("a").join(branch)).unwrap();
        let csv_b = fs::read(dir.path().join("b").join(branch)).unwrap();
        assert_eq!(csv_a, csv_b, "{branch} is byte-identical");
    }
}

#[test]
fn cusp_demo_rejects_positive_acceleration_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["cusp-demo", "--out-dir", "x", "--a-positive"], dir.path());
    let report = stdout_json(&out);
    let rejection = report["a_positive_rejection"].as_str().unwrap();
    assert!(rejection.contains("requires a < 0"), "rejection: {rejection}");
    assert_eq!(report["branches"].as_array().unwrap().len(), 0);
}
