use std::path::Path;
use std::process::Command;

use mpg_cli::report::{audit, ReportDocument};
use mpg_cli::run;
use serde_json::Value;

fn mpg(args: &[&str]) -> (i32, Vec<u8>, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["mpg"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, out, String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn parse_report(bytes: &[u8]) -> ReportDocument<Value> {
    serde_json::from_slice(bytes).unwrap()
}

const MINIMAL: &str = r#"{"format_version": 1, "agent_count": 1, "state_count": 1, "action_counts": [1],
    "discount": 0.5, "payoffs": [[[1.0]]], "transitions": [[[1.0]]]}"#;

const PENNIES: &str = r#"{"format_version": 1, "agent_count": 2, "state_count": 1, "action_counts": [2, 2],
    "discount": 0.9,
    "payoffs": [[[1, -1, -1, 1]], [[-1, 1, 1, -1]]],
    "transitions": [[[1], [1], [1], [1]]]}"#;

#[test]
fn minimal_document_is_analyzed() {
    let dir = tempfile::tempdir().unwrap();
    let game = write(dir.path(), "g.json", MINIMAL);
    let (code, out, _) = mpg(&["analyze", &game, "--assert"]);
    assert_eq!(code, 0);
    let doc = parse_report(&out);
    assert!(audit(&doc).unwrap());
    assert_eq!(doc.result["potential_found"], Value::Bool(true));
    assert_eq!(doc.inputs[0].sha256.len(), 64);
}

#[test]
fn validation_failures_exit_two_with_paths() {
    let dir = tempfile::tempdir().unwrap();
    let bad_row = write(dir.path(), "row.json", &MINIMAL.replace("[[[1.0]]]}", "[[[0.9]]]}"));
    let (code, _, err) = mpg(&["analyze", &bad_row]);
    assert_eq!(code, 2);
    assert!(err.contains("transitions[0][0]"), "{err}");

    let no_discount = write(dir.path(), "nd.json", &MINIMAL.replace(r#""discount": 0.5,"#, ""));
    let (code, _, err) = mpg(&["analyze", &no_discount]);
    assert_eq!(code, 2);
    assert!(err.contains("`discount`"), "{err}");

    let arity = write(dir.path(), "ar.json", &MINIMAL.replace(r#""payoffs": [[[1.0]]]"#, r#""payoffs": [[[1.0, 2.0]]]"#));
    let (code, _, err) = mpg(&["analyze", &arity]);
    assert_eq!(code, 2);
    assert!(err.contains("payoffs[0][0]"), "{err}");

    let not_json = write(dir.path(), "nj.json", "{ nope");
    assert_eq!(mpg(&["analyze", &not_json]).0, 2);
    assert_eq!(mpg(&["analyze", "/nonexistent/game.json"]).0, 2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mpg(&["frobnicate"]).0, 1);
    assert_eq!(mpg(&["verify-nash"]).0, 1);
    assert_eq!(mpg(&["counterexample", "--grid", "1"]).0, 1);
    assert_eq!(mpg(&["counterexample", "--tolerance", "-1"]).0, 1);
    assert_eq!(mpg(&["--help"]).0, 0);
}

#[test]
fn matching_pennies_has_no_potential() {
    let dir = tempfile::tempdir().unwrap();
    let game = write(dir.path(), "mp.json", PENNIES);
    let (code, out, _) = mpg(&["analyze", &game, "--assert"]);
    assert_eq!(code, 3);
    let doc = parse_report(&out);
    assert!(audit(&doc).unwrap());
    assert_eq!(doc.result["cycle"]["payoff_sum"].as_f64().unwrap().abs(), 8.0);
    assert_eq!(mpg(&["solve-dual", &game]).0, 2);
}

#[test]
fn slow_discount_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let game = write(dir.path(), "slow.json", &MINIMAL.replace("0.5", "0.9999999"));
    let (code, _, err) = mpg(&["solve-dual", &game]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn counterexample_exports_round_trip_through_verify_nash() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("export");
    let report = dir.path().join("report.json");
    let (code, _, _) = mpg(&[
        "counterexample", "--grid", "11", "--assert",
        "--export-dir", export.to_str().unwrap(),
        "--out", report.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let doc = parse_report(&std::fs::read(&report).unwrap());
    assert!(doc.passed && audit(&doc).unwrap());
    let checks = doc.result["checks"].as_array().unwrap();
    let exit_of = |name: &str| checks.iter().find(|c| c["name"] == name).unwrap()["exit_code"].as_i64().unwrap();
    assert_eq!(exit_of("dual_optimum_nash"), 3);
    assert_eq!(exit_of("known_policy_nash"), 0);

    let game = export.join("game.json");
    let game = game.to_str().unwrap();
    let nash = export.join("nash_policy.json");
    let dual = export.join("dual_policy.json");
    let (code, out, _) = mpg(&["verify-nash", game, nash.to_str().unwrap(), "--epsilon", "1e-6", "--assert"]);
    assert_eq!(code, 0);
    assert!(audit(&parse_report(&out)).unwrap());
    let (code, out, _) = mpg(&["verify-nash", game, dual.to_str().unwrap(), "--epsilon", "0.5", "--assert"]);
    assert_eq!(code, 3);
    let doc = parse_report(&out);
    assert!(audit(&doc).unwrap());
    assert!((doc.result["max_gap"].as_f64().unwrap() - 9.0).abs() < 0.01);

    let (code, out, _) = mpg(&["solve-dual", game, "--assert"]);
    assert_eq!(code, 3);
    let doc = parse_report(&out);
    assert!(audit(&doc).unwrap());
    assert_eq!(doc.result["potential_source"], "document");

    let (code, out, _) = mpg(&["analyze", game]);
    assert_eq!(code, 0);
    assert!(audit(&parse_report(&out)).unwrap());
}

#[test]
fn learn_trace_rows_and_gap_count() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("export");
    mpg(&["counterexample", "--grid", "5", "--export-dir", export.to_str().unwrap()]);
    let game = export.join("game.json");
    let trace = dir.path().join("trace.csv");
    let report = dir.path().join("learn.json");
    let (code, _, err) = mpg(&[
        "learn", game.to_str().unwrap(), "--eta", "0.001", "--batch", "4", "--iters", "95",
        "--gap-every", "10", "--out", trace.to_str().unwrap(), "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let mut reader = csv::Reader::from_path(&trace).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["iteration", "agent", "batch_return", "mean_action", "nash_gap"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 95 * 2);
    for agent in ["0", "1"] {
        let gaps = rows.iter().filter(|r| &r[1] == agent && !r[4].is_empty()).count();
        assert_eq!(gaps, 95 / 10);
    }
    let doc = parse_report(&std::fs::read(&report).unwrap());
    assert!(audit(&doc).unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = mpg(&["counterexample", "--grid", "11", "--seed", "4"]).1;
    let b = mpg(&["counterexample", "--grid", "11", "--seed", "4"]).1;
    assert_eq!(a, b);
    let game = write(dir.path(), "mp.json", PENNIES);
    let t1 = mpg(&["learn", &game, "--eta", "0.01", "--iters", "50", "--seed", "9"]).1;
    let t2 = mpg(&["learn", &game, "--eta", "0.01", "--iters", "50", "--seed", "9"]).1;
    assert_eq!(t1, t2);
    let t3 = mpg(&["learn", &game, "--eta", "0.01", "--iters", "50", "--seed", "10"]).1;
    assert_ne!(t1, t3);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mpg");
    let status = Command::new(bin).args(["counterexample", "--grid", "3", "--assert"]).output().unwrap();
    assert_eq!(status.status.code(), Some(0));
    let status = Command::new(bin).arg("nonsense").output().unwrap();
    assert_eq!(status.status.code(), Some(1));
}
