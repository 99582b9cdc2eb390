use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ewens-pitman"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write_config(dir: &Path, doc: serde_json::Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn validate_config_fills_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), serde_json::json!({"kind": "crp-lln", "alpha": 0.5, "n": 100, "seed": 1}));
    let out = run(&["validate-config", "--config", &cfg]);
    assert!(out.status.success());
    let doc = stdout_json(&out);
    assert_eq!(doc["valid"], true);
    assert_eq!(doc["config"]["theta"], 0.0);
    assert_eq!(doc["config"]["replicates"], 1000);
}

#[test]
fn invalid_config_exits_with_code_two_and_json_error() {
    let dir = tempfile::tempdir().unwrap();
    for doc in [
        serde_json::json!({"kind": "crp-lln", "alpha": 1.5, "n": 100, "seed": 1}),
        serde_json::json!({"kind": "crp-lln", "alpha": 0.5, "n": 100, "seed": 1, "colour": "red"}),
        serde_json::json!({"kind": "crp-lln", "alpha": 0.5, "seed": 1}),
    ] {
        let cfg = write_config(dir.path(), doc.clone());
        let out = run(&["validate-config", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{doc}");
        let err = stdout_json(&out);
        assert_eq!(err["error"]["kind"], "config");
        assert!(!err["error"]["message"].as_str().unwrap().is_empty());
    }
}

#[test]
fn overrides_apply_after_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), serde_json::json!({"kind": "crp-lln", "alpha": 0.5, "n": 100, "seed": 1}));
    let out = run(&["validate-config", "--config", &cfg, "--override", "alpha=0.25", "--override", "n=[10,20]"]);
    assert!(out.status.success());
    let doc = stdout_json(&out);
    assert_eq!(doc["config"]["alpha"], 0.25);
    assert_eq!(doc["config"]["n"], serde_json::json!([10, 20]));
    let out = run(&["validate-config", "--config", &cfg, "--override", "alpha"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_kind_must_match_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), serde_json::json!({"kind": "crp-lln", "alpha": 0.5, "n": 100, "seed": 1}));
    let out = run(&["experiment", "clt-y", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_prints_parseable_csv() {
    let out = run(&["simulate", "crp", "--alpha", "0.5", "--n", "200", "--seed", "3", "--replicates", "2", "--grid-size", "10"]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    let t = headers.iter().position(|h| h == "t").unwrap();
    let value = headers.iter().position(|h| h == "value").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 22);
    let last: f64 = rows[10][value].parse().unwrap();
    assert_eq!(rows[10][t].parse::<f64>().unwrap(), 1.0);
    assert!(last > 0.0);

    let again = run(&["simulate", "crp", "--alpha", "0.5", "--n", "200", "--seed", "3", "--replicates", "2", "--grid-size", "10"]);
    assert_eq!(again.stdout, out.stdout);

    let urn = run(&["simulate", "urn", "--alpha", "0.5", "--n", "200", "--seed", "3", "--grid-size", "10"]);
    assert!(urn.status.success(), "{}", String::from_utf8_lossy(&urn.stdout));
    assert_eq!(csv::Reader::from_reader(urn.stdout.as_slice()).records().count(), 11);
}

#[test]
fn replay_reproduces_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let cfg = write_config(
        dir.path(),
        serde_json::json!({
            "alpha": 0.5, "n": 500, "seed": 9, "replicates": 40,
            "trajectories": true, "output_dir": first,
        }),
    );
    let out = run(&["experiment", "clt-w-quenched", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = stdout_json(&out);
    assert_eq!(summary["experiment"], "clt-w-quenched");

    let second = dir.path().join("second");
    let out = run(&["replay", first.join("metadata.json").to_str().unwrap(), "--output-dir", second.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    for name in ["reports.jsonl", "moments.csv", "replicates.csv", "trajectories.csv", "realization.json"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert!(a == b, "{name} differs after replay");
    }
}

#[test]
fn missing_metadata_is_an_io_error() {
    let out = run(&["replay", "/nonexistent/metadata.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["error"]["kind"], "io");
}
