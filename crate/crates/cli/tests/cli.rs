use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hgssl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgssl"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn generated() -> TempDir {
    let dir = TempDir::new().unwrap();
    let out = hgssl(
        &[
            "generate",
            "--per-class",
            "20",
            "--seed",
            "3",
            "--out-dir",
            "d",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir
}

const DATA: [&str; 6] = [
    "--features",
    "d/features.csv",
    "--labels",
    "d/labels.csv",
    "--truth",
    "d/truth.csv",
];

fn run_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["run"];
    v.extend(DATA);
    v.extend(extra);
    v
}

#[test]
fn run_writes_outputs_and_echoes_defaults() {
    let dir = generated();
    let out = hgssl(
        &run_args(&["--clusters", "6", "--out-dir", "o"]),
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let predictions = fs::read_to_string(dir.path().join("o/predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 60);
    assert!(predictions.lines().all(|l| l.split(',').count() == 2 + 3));

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/metrics.json")).unwrap())
            .unwrap();
    let config = &metrics["run"]["config"];
    assert_eq!(config["solver"]["alpha"], 0.96);
    assert_eq!(config["solver"]["gamma"], 1.0);
    assert_eq!(config["seed"], 0);
    assert_eq!(config["method"], "hyper-sym");
    assert!(metrics["run"]["evaluation"]["sensitivity"]["micro"].is_number());
    assert!(dir.path().join("o/timing.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = generated();
    for (method, out_dir) in [
        ("graph-sym", "a"),
        ("graph-sym", "b"),
        ("hyper-rw", "c"),
        ("hyper-rw", "e"),
    ] {
        let out = hgssl(
            &run_args(&[
                "--method",
                method,
                "--clusters",
                "6",
                "--solver",
                "iterative",
                "--out-dir",
                out_dir,
            ]),
            dir.path(),
        );
        assert!(out.status.success());
    }
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    for (x, y) in [("a", "b"), ("c", "e")] {
        assert_eq!(
            read(&format!("{x}/predictions.csv")),
            read(&format!("{y}/predictions.csv"))
        );
        assert_eq!(
            read(&format!("{x}/metrics.json")),
            read(&format!("{y}/metrics.json"))
        );
    }
}

#[test]
fn non_convergence_sets_exit_status() {
    let dir = generated();
    let out = hgssl(
        &run_args(&[
            "--method",
            "graph-sym",
            "--solver",
            "iterative",
            "--max-iter",
            "3",
            "--out-dir",
            "o",
        ]),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let metrics = fs::read_to_string(dir.path().join("o/metrics.json")).unwrap();
    assert!(metrics.contains("\"converged\": false"));
}

#[test]
fn input_errors_name_the_line() {
    let dir = generated();
    fs::write(dir.path().join("bad.csv"), "1,2\n3,4\n5\n").unwrap();
    let out = hgssl(
        &["run", "--features", "bad.csv", "--labels", "d/labels.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3:"));

    let out = hgssl(&run_args(&["--alpha", "1.5"]), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_labels_warn() {
    let dir = generated();
    fs::write(dir.path().join("none.csv"), "").unwrap();
    let out = hgssl(
        &[
            "run",
            "--features",
            "d/features.csv",
            "--labels",
            "none.csv",
            "--classes",
            "3",
            "--clusters",
            "6",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero-confidence"));
}

#[test]
fn sweep_reports_each_cell() {
    let dir = generated();
    let mut args = vec!["sweep"];
    args.extend(DATA);
    args.extend([
        "--method",
        "hyper-sym",
        "--clusters",
        "3,6,12",
        "--out-dir",
        "s",
    ]);
    let out = hgssl(&args, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for k in ["k=3", "k=6", "k=12"] {
        assert!(text.contains(k), "{text}");
    }
    assert!(text.contains("best: "));
    assert!(dir.path().join("s/report.json").exists());

    let mut all = vec!["sweep"];
    all.extend(DATA);
    all.extend(["--clusters", "6", "--knn", "5"]);
    let out = hgssl(&all, dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 6 + 3);
}

#[test]
fn check_is_deterministic_and_rejects_zero() {
    let dir = TempDir::new().unwrap();
    let a = hgssl(&["check", "--instances", "5", "--seed", "9"], dir.path());
    let b = hgssl(&["check", "--instances", "5", "--seed", "9"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!String::from_utf8_lossy(&a.stdout).contains("FAIL"));

    let zero = hgssl(&["check", "--instances", "0"], dir.path());
    assert_eq!(zero.status.code(), Some(2));
}
