use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dyadic-bump"))
}

fn without_wall_time(text: &str) -> Value {
    let mut v: Value = serde_json::from_str(text).unwrap();
    v.as_object_mut().unwrap().remove("wall_time");
    v
}

#[test]
fn passing_suite_exits_zero_and_is_deterministic() {
    let run = || {
        let out = bin()
            .args(["holder", "--seed", "3", "--budget", "200", "--depth", "6"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        without_wall_time(&String::from_utf8(out.stdout).unwrap())
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a["suite"], "holder");
    assert_eq!(a["config"]["resolved"]["trials"], 200);
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = bin().args(["wobble", "--seed", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\nsuite = \"wobble\"\n").unwrap();
    let out = bin().args(["run", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn missing_seed_is_rejected() {
    let out = bin().args(["bump"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_verdict_exits_one() {
    // a huge cascade spread across depths cannot stay within 10%
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 0\nsuite = \"stopping\"\neta = 0.9\npairs = 4\nbudget = 10\ndepths = [4, 10]\n").unwrap();
    let out = bin().args(["run", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[FAIL]"));
}

#[test]
fn writes_json_with_csv_alongside() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("tau.json");
    let out = bin()
        .args(["tau-scaling", "--seed", "0", "--depth", "7", "--budget", "4", "--out", out_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(report["constants"].as_array().unwrap().iter().all(|c| c["semantics"].is_string()));
    let csv = std::fs::read_to_string(dir.path().join("tau.csv")).unwrap();
    assert!(csv.starts_with("tau,lerner,m,n,norm,normalized\n"));
}

#[test]
fn search_streams_json_lines() {
    let out = bin()
        .args(["search", "--seed", "5", "--depth", "6", "--budget", "3", "--format", "jsonl"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    for line in text.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }
}
