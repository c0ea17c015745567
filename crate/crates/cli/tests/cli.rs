use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn schmidt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schmidt")).args(args).output().expect("run schmidt")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("schmidt-cli-{}-{name}", std::process::id()))
}

#[test]
fn curve_constants_report_demo_values() {
    let out =
        schmidt(&["constants", "--regime", "curve", "--i", "1/2", "--j", "1/2", "--beta", "1/2", "--mode", "demo"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let v = &v["constants"];
    assert_eq!(v["r"], "1024");
    assert_eq!(v["c"], "1/137438953472");
    assert_eq!(v["q_cap"], "351");
}

#[test]
fn plane_and_line_constants_succeed() {
    for regime in ["line", "plane"] {
        let out = schmidt(&["constants", "--regime", regime]);
        assert_eq!(out.status.code(), Some(0), "{regime}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(json_of(&out).is_object());
    }
}

#[test]
fn verify_reports_violation_with_exit_two() {
    let out = schmidt(&["verify", "--x", "1/2", "--y", "1/2", "--c", "1/100", "--Q", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json_of(&out);
    assert_eq!(v["passes"], false);
    assert_eq!(v["violations"], serde_json::json!([2, 4, 6, 8, 10]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("violation"));
}

#[test]
fn verify_passes_for_badly_placed_point() {
    let out = schmidt(&["verify", "--x", "1/3", "--y", "2/7", "--c", "1/100", "--Q", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["passes"], true);
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(schmidt(&["verify", "--x", "1/2", "--y", "abc", "--c", "1/100", "--Q", "10"]).status.code(), Some(1));
    assert_eq!(schmidt(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(schmidt(&["constants", "--i", "2/3", "--j", "2/3"]).status.code(), Some(1));
}

#[test]
fn play_is_deterministic_per_seed() {
    let a = schmidt(&["play", "--regime", "line", "--seed", "7"]);
    let b = schmidt(&["play", "--regime", "line", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = schmidt(&["play", "--regime", "line", "--seed", "8"]);
    assert_ne!(json_of(&a)["final_enclosure"], json_of(&c)["final_enclosure"]);
}

#[test]
fn play_writes_transcript_file() {
    let path = scratch("play.json");
    let out = schmidt(&["play", "--regime", "line", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let t: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(t["bob"], "random:3");
    assert!(t["moves"].as_array().is_some_and(|m| !m.is_empty()));
    let _ = std::fs::remove_file(path);
}

#[test]
fn enumerate_writes_csv_rows() {
    let path = scratch("points.csv");
    let out = schmidt(&["enumerate", "--regime", "curve", "--levels", "3", "--csv", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("level,class,p,r,q,A,B,C,kind,qE"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 41);
    assert!(rows.contains(&"2,1,2,1,4,2,0,-1,nonstar,8"));
    let _ = std::fs::remove_file(path);
}

#[test]
fn scan_dio_returns_exact_minimum() {
    let out = schmidt(&["scan-dio", "--a", "3/7", "--b", "2/9", "--Q", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["min"], "3/7");
    assert_eq!(v["argmin"], 1);
}

#[test]
fn construct_certifies_line_games() {
    let out = schmidt(&["construct", "--regime", "line", "--games", "3", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
