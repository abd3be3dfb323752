use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mtslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtslab")).args(args).output().unwrap()
}

fn text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, r#"{"kind":"hst","level_weights":["1","8"],"tree":[[2],[2,2]]}"#).unwrap();
    let out = mtslab(&["validate", p(&good)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out).starts_with("valid hst metric on 4 points"), "{}", text(&out));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"kind":"hst","level_weights":["8","1"],"tree":[[2],[2,2]]}"#).unwrap();
    let out = mtslab(&["validate", p(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).starts_with("invalid"));

    let out = mtslab(&["validate", p(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn construct_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let built = dir.path().join("paired.json");
    let out = mtslab(&["construct", "--adversary", "paired-uniform", "--n", "8", "--C", "8", "--out", p(&built)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&built).unwrap()).unwrap();
    assert!(value["predicted_bound"]["formula"].as_str().is_some());

    let inst = dir.path().join("inst.json");
    let mut instance = value["instance"].clone();
    instance["sequence"] = serde_json::json!([[0, 3], [1, 2]]);
    fs::write(&inst, instance.to_string()).unwrap();
    let out = mtslab(&["solve", p(&inst)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let opt: serde_json::Value = serde_json::from_str(&text(&out)).unwrap();
    assert!(opt["cost"].is_string() || opt["cost"].is_number());
}

#[test]
fn simulate_report_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = mtslab(&[
        "simulate", "--adversary", "paired-uniform", "--algorithm", "lazy", "--n", "8", "--C", "8", "--phases", "3",
        "--out", p(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mtslab(&["report", p(&report), "--pretty"]);
    assert!(out.status.success());
    assert!(text(&out).contains("lazy vs paired-uniform"), "{}", text(&out));

    let out = mtslab(&["verify", "--adversary", "paired-uniform", "--algorithm", "greedy", "--n", "8", "--C", "8", "--phases", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out).trim_end().ends_with("all rows pass"));
}

#[test]
fn sweep_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    fs::write(&grid, r#"{"adversaries":["paired-uniform"],"algorithms":["lazy","greedy"],"n":[4,8],"C":["4"],"phases":2}"#)
        .unwrap();
    let table = dir.path().join("table.csv");
    let out = mtslab(&["sweep", "--grid", p(&grid), "--out", p(&table)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&table).unwrap().lines().count(), 5);
}

#[test]
fn oversized_construction_is_refused() {
    let out = mtslab(&["construct", "--adversary", "lift-construction", "--m", "8", "--levels", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("too large"), "{}", String::from_utf8_lossy(&out.stderr));
}
