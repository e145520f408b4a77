//! Contract tests for the `gyra` binary: config validation and error
//! codes, output formats, seed handling, and the round-trip property of
//! result documents.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn gyra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gyra"))
        .args(args)
        .env_remove("GYRA_THREADS")
        .output()
        .unwrap()
}

fn stderr_error(output: &Output) -> Value {
    let text = String::from_utf8_lossy(&output.stderr);
    let json_part = text
        .lines()
        .take_while(|line| !line.starts_with("wall_time"))
        .collect::<Vec<_>>()
        .join("\n");
    serde_json::from_str::<Value>(&json_part)
        .unwrap_or_else(|e| panic!("stderr is not an error document ({e}): {text}"))["error"]
        .clone()
}

const WORKED_MODEL: &str =
    r#""model": {"stiffness": {"n": 2, "data": [2, 1, 1, 2]}, "temperatures": [1.0, 2.0]}"#;

#[test]
fn unknown_config_keys_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{"model": {"stiffness": {"n": 2, "data": [2, 1, 1, 2]}, "temperatures": [1.0, 2.0], "stiffnes": 3}}"#,
    );
    let out = gyra(&["ness", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["code"], "schema");
    assert!(err["message"].as_str().unwrap().contains("model"), "{err}");
}

#[test]
fn out_of_range_values_name_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{"model": {"stiffness": {"n": 2, "data": [2, 1, 1, 2]}, "temperatures": [1.0, -2.0]}}"#,
    );
    let out = gyra(&["ness", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["code"], "range");
    let details = err["details"].as_array().unwrap();
    assert!(
        details
            .iter()
            .any(|d| d.as_str().unwrap().contains("model.temperatures[1]")),
        "{details:?}"
    );
}

#[test]
fn declared_command_must_match_the_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "ness.json",
        &format!(r#"{{"command": "ness", {WORKED_MODEL}}}"#),
    );
    let out = gyra(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["code"], "usage");
}

#[test]
fn missing_required_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "m.json", &format!("{{{WORKED_MODEL}}}"));
    let out = gyra(&["simulate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert!(
        err["message"].as_str().unwrap().contains("simulation"),
        "{err}"
    );
}

#[test]
fn sweep_csv_follows_the_quadratic_law() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "sweep.json",
        &format!(r#"{{{WORKED_MODEL}, "sweep": {{"n_points": 101}}}}"#),
    );
    let out = gyra(&["sweep", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();

    let mut rows = 0;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap();
    assert_eq!(header, "alpha,power");
    let p_star = 1.0 / 22.0;
    for line in lines {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (alpha, power) = (fields[0], fields[1]);
        let law = 4.0 * p_star * alpha * (1.0 - alpha);
        assert!(
            (power - law).abs() <= 1e-12,
            "alpha {alpha}: {power} vs {law}"
        );
        rows += 1;
    }
    assert_eq!(rows, 101);
}

#[test]
fn diagonal_stiffness_reports_detailed_balance_and_no_power() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "diag.json",
        r#"{"model": {"stiffness": {"n": 2, "data": [2, 0, 0, 3]}, "temperatures": [1.0, 2.0]}}"#,
    );
    let out = gyra(&["ness", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["results"]["detailed_balance"], Value::Bool(true));
    let p_star = doc["results"]["p_star"]["value"].as_f64().unwrap();
    assert_eq!(p_star, 0.0);
}

#[test]
fn every_result_carries_unit_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "m.json", &format!("{{{WORKED_MODEL}}}"));
    let out = gyra(&["ness", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();

    fn walk(value: &Value, path: &str, violations: &mut Vec<String>) {
        let Value::Object(map) = value else { return };
        if map.contains_key("value") || map.contains_key("data") {
            for key in ["unit", "provenance"] {
                if !map.contains_key(key) {
                    violations.push(format!("{path}: missing {key}"));
                }
            }
            if let Some(p) = map.get("provenance").and_then(Value::as_str) {
                if !["analytic", "monte-carlo", "grid"].contains(&p) {
                    violations.push(format!("{path}: unknown provenance {p}"));
                }
            }
            return;
        }
        for (key, child) in map {
            walk(child, &format!("{path}.{key}"), violations);
        }
    }
    let mut violations = Vec::new();
    walk(&doc["results"], "results", &mut violations);
    assert!(violations.is_empty(), "{violations:?}");
    assert!(doc["results"]["p_star"].is_object());
}

#[test]
fn result_documents_round_trip_through_their_echoed_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "first.json",
        &format!(
            r#"{{{WORKED_MODEL}, "simulation": {{"dt": 1e-3, "n_steps": 20000, "burn_in": 1000, "n_trajectories": 2, "seed": 5}}}}"#
        ),
    );
    let first = dir.path().join("first.out.json");
    let out = gyra(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let doc: Value = serde_json::from_slice(&std::fs::read(&first).unwrap()).unwrap();
    let echoed = write_config(
        dir.path(),
        "echoed.json",
        &serde_json::to_string_pretty(&doc["config"]).unwrap(),
    );
    let second = dir.path().join("second.out.json");
    let out = gyra(&[
        "simulate",
        "--config",
        echoed.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap(),
        "rerun from the echoed config should reproduce the document"
    );
}

#[test]
fn the_seed_flag_overrides_the_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{{WORKED_MODEL}, "simulation": {{"dt": 1e-3, "n_steps": 20000, "burn_in": 1000, "n_trajectories": 2, "seed": 5}}}}"#
    );
    let config = write_config(dir.path(), "sim.json", &body);
    let with_flag = gyra(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert!(with_flag.status.success());
    let doc: Value = serde_json::from_slice(&with_flag.stdout).unwrap();
    assert_eq!(doc["seed"], Value::from(99));

    let config99 = write_config(
        dir.path(),
        "sim99.json",
        &body.replace("\"seed\": 5", "\"seed\": 99"),
    );
    let explicit = gyra(&["simulate", "--config", config99.to_str().unwrap()]);
    assert_eq!(with_flag.stdout, explicit.stdout);

    // Without a simulation section the flag has nothing to override.
    let ness_config = write_config(dir.path(), "m.json", &format!("{{{WORKED_MODEL}}}"));
    let out = gyra(&[
        "ness",
        "--config",
        ness_config.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["code"], "usage");
}

#[test]
fn diverging_integration_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "big-dt.json",
        &format!(
            r#"{{{WORKED_MODEL}, "simulation": {{"dt": 5.0, "n_steps": 2000, "n_trajectories": 1, "seed": 3}}}}"#
        ),
    );
    let out = gyra(&["simulate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_error(&out);
    assert_eq!(err["code"], "numerical");
    assert_eq!(err["exit_code"], Value::from(3));
}

#[test]
fn unreachable_design_target_is_a_convergence_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "design.json",
        r#"{"circuit": {"c1": 1.0, "c2": 2.0, "cc": 1.0, "r": 1.0, "t1": 1.0, "t2": 2.0, "design_omega": 1e6}}"#,
    );
    let out = gyra(&["circuit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_error(&out)["code"], "non-convergence");
}

#[test]
fn csv_is_rejected_for_commands_without_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "m.json", &format!("{{{WORKED_MODEL}}}"));
    let out = gyra(&[
        "ness",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["code"], "usage");
}

#[test]
fn malformed_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "m.json", &format!("{{{WORKED_MODEL}}}"));
    let out = Command::new(env!("CARGO_BIN_EXE_gyra"))
        .args(["ness", "--config", config.to_str().unwrap()])
        .env("GYRA_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["code"], "usage");

    let out = gyra(&[
        "ness",
        "--config",
        config.to_str().unwrap(),
        "--threads",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["code"], "usage");
}

#[test]
fn wall_time_stays_out_of_the_result_document() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "sim.json",
        &format!(
            r#"{{{WORKED_MODEL}, "simulation": {{"dt": 1e-3, "n_steps": 20000, "burn_in": 1000, "n_trajectories": 2, "seed": 5}}}}"#
        ),
    );
    let out = gyra(&["simulate", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        !text.contains("wall_time"),
        "timing leaked into the document"
    );
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("wall_time"), "timing missing from stderr");
}
