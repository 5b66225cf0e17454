use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const DOG_SHEEP: &str = "# one dog, four sheep\na = 0.2 1 1 1 1\nb = 1 1 1 1 1\n";
const DOG_PAIR: &str = "a = 0.2 1\nb = 1 1\n";
const SINGLETONS: &str = "a = 0.5 0.3 0.1\nb = 0.6 0.7 0.8\n";
const CRITICAL: &str = "a = 0.5 1\nb = 1 1.5\n";

fn xclouds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xclouds")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn analyze_two_particle_dog() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "pair.cfg", DOG_PAIR);
    let out = xclouds(&["analyze", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("partition: ({1..2})"), "{text}");
    assert!(text.contains("speed 0.4  width 2.5"), "{text}");
    assert!(text.contains("rho: 0.6\n"), "{text}");
}

#[test]
fn analyze_singletons() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "single.cfg", SINGLETONS);
    let out = xclouds(&["analyze", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("partition: ({1}, {2}, {3})"), "{text}");
    assert!(text.contains("speeds: 0.1 0.4 0.7\n"), "{text}");
}

#[test]
fn analyze_critical_tie_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "crit.cfg", CRITICAL);
    let out = xclouds(&["analyze", s(&cfg)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("critical tie"));
}

#[test]
fn analyze_json_is_canonical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dog.cfg", &format!("{DOG_SHEEP}seed = 9\n"));
    let out = xclouds(&["analyze", "--json", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(format!("{}\n", serde_json::to_string_pretty(&value).unwrap()), text);
    for key in ["partition", "rho", "speeds", "cloud_speeds", "widths", "flags", "clt", "meta"] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    assert_eq!(value["partition"], serde_json::json!([[1, 5]]));
    assert_eq!(value["meta"]["seed"], 9);
    assert_eq!(text, stdout(&xclouds(&["analyze", "--json", s(&cfg)])));
}

#[test]
fn analyze_merge_trace() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dog.cfg", DOG_SHEEP);
    let text = stdout(&xclouds(&["analyze", "--trace-merges", s(&cfg)]));
    assert!(text.contains("k=0 ({1}, {2}, {3}, {4}, {5})"), "{text}");
    assert!(text.contains("k=4 ({1..5}) speeds=[0.16] stop"), "{text}");
    let json = stdout(&xclouds(&["analyze", "--json", "--trace-merges", s(&cfg)]));
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["merge_trace"].as_array().unwrap().len(), 5);
}

#[test]
fn invalid_configs_exit_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("unknown.cfg", "a = 0.2 1\nA = 3\n", "line 2: unknown key \"A\""),
        ("length.cfg", "a = 0.2\nb = 1 1\n", "a has 1 entries but b has 2"),
        ("nan.cfg", "a = 0.2 nan\nb = 1 1\n", "line 1"),
        ("dup.cfg", "a = 0.2 1\nb = 1 1\na = 1 1\n", "line 3"),
        ("rate.cfg", "a = 0.2 1\nb = 1 0\n", "b_2"),
    ];
    for (name, text, needle) in cases {
        let cfg = write(&dir, name, text);
        let out = xclouds(&["analyze", s(&cfg)]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(stderr(&out).contains(needle), "{name}: {}", stderr(&out));
    }
    let out = xclouds(&["analyze", s(&dir.path().join("missing.cfg"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(xclouds(&["analyze"]).status.code(), Some(2));
}

#[test]
fn simulate_csv_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dog.cfg", DOG_SHEEP);
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let out = xclouds(&[
            "simulate", s(&cfg), "--horizon", "2000", "--replicas", "4", "--seed", "7", "--out-csv", s(&csv),
            "--snapshots", "10",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        (std::fs::read(csv).unwrap(), stdout(&out))
    };
    let (first, summary) = run("a.csv");
    let (second, _) = run("b.csv");
    assert_eq!(first, second);
    let csv = String::from_utf8(first).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "replica,time,x_1,x_2,x_3,x_4,x_5");
    assert_eq!(lines.len(), 1 + 4 * 11);
    assert_eq!(lines[1], "0,0.000000,1,2,3,4,5");
    assert!(lines[44].starts_with("3,2000.000000,"));
    assert!(summary.contains("seed 7"));
    assert!(summary.contains("rng chacha8"));
    assert!(summary.contains("version "));
}

#[test]
fn simulate_dog_speeds_within_three_se() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dog.cfg", DOG_SHEEP);
    let out = xclouds(&["simulate", s(&cfg), "--horizon", "1e5", "--replicas", "8", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| l.trim_start().starts_with("x_")).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let f: Vec<&str> = row.split_whitespace().collect();
        let (m, se, v): (f64, f64, f64) = (f[1].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap());
        assert_eq!(v, 0.16);
        assert!((m - v).abs() <= 3.0 * se, "{row}");
    }
}

#[test]
fn simulate_rejects_zero_horizon() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dog.cfg", DOG_SHEEP);
    let out = xclouds(&["simulate", s(&cfg), "--horizon", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("horizon"));
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let dog = write(&dir, "dog.cfg", DOG_SHEEP);
    let out = xclouds(&["verify", s(&dog), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("result: PASS"));

    let single = write(&dir, "single.cfg", SINGLETONS);
    let out = xclouds(&["verify", s(&single), "--budget", "small"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("gap marginals") && l.contains("n/a")), "{text}");

    let pair = write(&dir, "pair.cfg", DOG_PAIR);
    let out = xclouds(&["verify", s(&pair), "--budget", "small", "--corrupt-expected"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("result: FAIL"));
}

#[test]
fn trace_writes_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "pair.cfg", DOG_PAIR);
    let args = ["trace", s(&cfg), "--horizon", "10", "--every", "2.5", "--seed", "4"];
    let out = xclouds(&args);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "replica,time,x_1,x_2");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("0,10.000000,"));
    assert_eq!(text, stdout(&xclouds(&args)));
}
