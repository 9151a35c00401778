use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/fig2.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capslice"))
        .args(args)
        .env_remove("CAPSLICE_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fig2() -> String {
    fixture().to_string_lossy().into_owned()
}

#[test]
fn validate_exit_codes() {
    let out = run(&["validate", &fig2()]);
    assert_eq!(out.status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let cyclic = dir.path().join("cyclic.json");
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(fixture()).unwrap()).unwrap();
    doc["edges"].as_array_mut().unwrap().push(serde_json::json!({"from": "d_1", "to": "n_5"}));
    fs::write(&cyclic, doc.to_string()).unwrap();
    let out = run(&["--format", "text", "validate", cyclic.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("CYCLE"));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"nodes\": [").unwrap();
    assert_eq!(run(&["validate", broken.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["validate", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn metrics_table_and_pairs() {
    let out = run(&["--format", "text", "metrics", &fig2()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row = text.lines().find(|l| l.starts_with("n_7")).unwrap();
    assert!(row.contains("0.5250"), "{row}");

    let out = run(&["--format", "machine", "metrics", &fig2(), "--pairs", "n_5,n_6", "--slice", "n_5,n_6,n_7,n_3"]);
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let cp = doc["coupling"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["from"] == "n_5" && c["to"] == "n_6")
        .unwrap();
    assert_eq!(cp["coupling"].as_f64(), Some(0.1667));

    let out = run(&["metrics", &fig2(), "--pairs", "d_1,n_6"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn slices_stream_records_then_summary() {
    let out = run(&["--format", "machine", "slices", &fig2()]);
    assert_eq!(out.status.code(), Some(0));
    let records: Vec<Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let (summary, slices) = records.split_last().unwrap();
    assert_eq!(summary["record"], "summary");
    assert_eq!(summary["complete"], true);
    assert!(slices
        .iter()
        .any(|s| s["members"] == serde_json::json!(["n_1", "n_3", "n_7"])));

    let initial = run(&["--format", "machine", "slices", &fig2(), "--initial-only"]);
    let lines = stdout(&initial).lines().count() - 1;
    assert_eq!(lines as u64, summary["initial"].as_u64().unwrap());
}

#[test]
fn truncated_run_is_flagged() {
    let out = run(&["--format", "text", "--max-slices", "1", "slices", &fig2()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("TRUNCATED"));
    let out = run(&["--format", "machine", "--max-slices", "1", "slices", &fig2()]);
    let last: Value = serde_json::from_str(stdout(&out).lines().last().unwrap()).unwrap();
    assert_eq!(last["complete"], false);
}

#[test]
fn optimize_with_f_only_weights_picks_top_ranked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"weights": {"f": 1, "tf": 0, "sched": 0}}"#).unwrap();
    let out = run(&["--format", "machine", "optimize", &fig2(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();

    let slices = run(&["--format", "machine", "slices", &fig2()]);
    let top: Value = serde_json::from_str(stdout(&slices).lines().next().unwrap()).unwrap();
    assert_eq!(doc["best"]["members"], top["members"]);
    assert_eq!(doc["globally_optimal"], true);

    let infeasible = dir.path().join("tight.json");
    fs::write(&infeasible, r#"{"tf_min": 0.9, "tf_default": 0.5}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_capslice"))
        .args(["--format", "machine", "optimize", &fig2()])
        .env("CAPSLICE_CONFIG", &infeasible)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["best"].is_null());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"weights": {"f": -1, "tf": 1, "sched": 1}}"#).unwrap();
    let out = run(&["optimize", &fig2(), "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenarios.json");
    fs::write(
        &path,
        r#"[{"kind": "modify_directive", "target": "d_9", "payload": {"relevance": 0.3}},
            {"kind": "delete_directive", "target": "d_10"}]"#,
    )
    .unwrap();
    let out = run(&[
        "--format",
        "machine",
        "--threshold",
        "0.2",
        "simulate",
        &fig2(),
        path.to_str().unwrap(),
        "--slice",
        "n_1,n_7,n_3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let first = &doc["cells"][0];
    assert_eq!(first["impact_count"], 2);
    assert_eq!(first["affected_directives"], serde_json::json!(["d_9"]));
    assert_eq!(first["affected_capabilities"], serde_json::json!(["n_7"]));

    let out = run(&["--threshold", "0", "simulate", &fig2(), path.to_str().unwrap(), "--slice", "n_1,n_7,n_3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", &fig2(), path.to_str().unwrap(), "--slice", "n_1,n_5,n_6"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn export_outputs() {
    let out = run(&["export", &fig2(), "--slice", "n_1,n_7,n_3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("digraph"));
    assert_eq!(text.matches("fillcolor").count(), 3);

    let out = run(&["--format", "machine", "export", &fig2(), "--to", "manifest", "--slice", "n_1,n_7,n_3"]);
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["capabilities"].as_array().unwrap().len(), 3);
    assert_eq!(doc["directive_count"], 14);
}

#[test]
fn machine_output_is_byte_identical_across_runs() {
    for args in [
        vec!["--format", "machine", "slices"],
        vec!["--format", "machine", "optimize"],
        vec!["--format", "machine", "metrics"],
        vec!["--format", "machine", "export", "--to", "manifest"],
    ] {
        let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        full.push(fig2());
        let full: Vec<&str> = full.iter().map(String::as_str).collect();
        let a = run(&full);
        let b = run(&full);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}
