//! The `sentry-bench` binary: exit codes, output files and messages.

use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sentry-bench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: [&str; 8] = [
    "--synthetic_train_rows",
    "2000",
    "--synthetic_test_rows",
    "1000",
    "--runs",
    "2",
    "--rbm.epochs",
    "2",
];

fn with_output<'a>(args: &[&'a str], out: &'a str) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(SMALL);
    v.extend(["--output", out]);
    v
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(bench(&["--help"]).status.code(), Some(0));
    assert_eq!(bench(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bench(&["frobnicate"]).status.code(), Some(1));

    let o = bench(&["run", "--detector", "foo"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("valid options: asch, rbc, ql, sarsa, td"), "{}", stderr(&o));

    let o = bench(&["run", "--no_such_key", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_config_line_names_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "# comment\nruns = 2\nnodes==\n").unwrap();
    let o = bench(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("nodes") && err.contains('3'), "{err}");
}

#[test]
fn missing_dataset_exits_two() {
    let o = bench(&["run", "--dataset", "/nonexistent/kddcup.data"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_prints_table_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bench(&with_output(&["run", "--detector", "ql"], out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("detector"));
    for f in ["metrics.json", "comparison.csv", "roc_ql.csv", "timing.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn compare_writes_one_row_per_detector() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bench(&with_output(&["compare", "--detectors", "ql,td,ql"], out));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let labels: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["ql", "td", "ql_2"]);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "detector = td\nruns = 5\n").unwrap();
    let out = dir.path().join("out");
    let o = bench(&with_output(
        &["run", "--config", cfg.to_str().unwrap()],
        out.to_str().unwrap(),
    ));
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["detector"], "td");
    // --runs 2 from the command line beats the file's 5
    assert_eq!(metrics["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bench(&with_output(&["train", "--detector", "sarsa"], out));
    assert!(o.status.success(), "{}", stderr(&o));
    let model = dir.path().join("model.json");
    assert!(model.is_file());
    let eval_out = dir.path().join("eval");
    let o = bench(&with_output(
        &["eval", "--model", model.to_str().unwrap()],
        eval_out.to_str().unwrap(),
    ));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(eval_out.join("metrics.json").is_file());
}

fn synth(dir: &Path, flavor: &str, rows: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{flavor}.data"));
    let o = bench(&["synth", "--flavor", flavor, "--rows", rows, "--seed", "3", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

#[test]
fn synth_then_ingest_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "training", "500");
    let encoded = dir.path().join("encoded.csv");
    let o = bench(&[
        "ingest",
        data.to_str().unwrap(),
        "--encoded",
        encoded.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["parsed"], 500);
    assert_eq!(report["field_count_errors"], 0);
    let csv = std::fs::read_to_string(encoded).unwrap();
    assert_eq!(csv.lines().count(), 501);
}

#[test]
fn file_source_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let train = synth(dir.path(), "training", "3000");
    let test = synth(dir.path(), "test", "2000");
    let out = dir.path().join("out");
    let o = bench(&[
        "run",
        "--dataset",
        train.to_str().unwrap(),
        "--test_dataset",
        test.to_str().unwrap(),
        "--train_fraction",
        "0.5",
        "--test_fraction",
        "0.5",
        "--runs",
        "2",
        "--detector",
        "ql",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["runs"][0]["train_rows"], 1500);
    assert_eq!(metrics["runs"][0]["test_rows"], 1000);
}
