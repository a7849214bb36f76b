use std::path::Path;
use std::process::{Command, Output};

use nalgebra::Matrix3;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-bayes"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn register_writes_a_proper_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["register", "--synthetic", "--outlier-ratio", "0.4", "--out-dir", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = json(dir.path().join("o/transform.json"));
    let rows = t["rotation"].as_array().unwrap();
    let r = Matrix3::from_fn(|i, j| rows[i][j].as_f64().unwrap());
    assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-10);
    assert!((r.determinant() - 1.0).abs() < 1e-10);
    assert!(t["ground_truth"]["rotation_error_deg"].as_f64().unwrap() < 1.0);
    let weights = std::fs::read_to_string(dir.path().join("o/weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 101);
}

#[test]
fn register_from_ply_pair() {
    let dir = tempfile::tempdir().unwrap();
    let src = "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n1 1 1\n";
    let dst = "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 0 0\n2 0 0\n1 1 0\n1 0 1\n2 1 1\n";
    std::fs::write(dir.path().join("a.ply"), src).unwrap();
    std::fs::write(dir.path().join("b.ply"), dst).unwrap();
    let out = run(
        dir.path(),
        &["register", "--input", "a.ply", "--target", "b.ply", "--method", "asor", "--out-dir", "o"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = json(dir.path().join("o/transform.json"));
    let tx = t["translation"][0].as_f64().unwrap();
    assert!((tx - 1.0).abs() < 1e-9);
}

#[test]
fn pgo_on_g2o_input() {
    let dir = tempfile::tempdir().unwrap();
    let g2o = "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0 0\nVERTEX_SE2 2 2 0 0\nVERTEX_SE2 3 3 0 0\n\
EDGE_SE2 0 1 1 0 0 100 0 0 100 0 100\nEDGE_SE2 1 2 1 0 0 100 0 0 100 0 100\n\
EDGE_SE2 2 3 1 0 0 100 0 0 100 0 100\nEDGE_SE2 0 3 3 0 0 100 0 0 100 0 100\n\
EDGE_SE2 0 2 -7 4 1 100 0 0 100 0 100\n";
    std::fs::write(dir.path().join("g.g2o"), g2o).unwrap();
    let out = run(dir.path(), &["pgo", "--input", "g.g2o", "--method", "gnc-tls", "--out-dir", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("o/optimized.g2o")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("VERTEX_SE2")).count(), 4);
    let traj = std::fs::read_to_string(dir.path().join("o/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["register", "--method", "bogus"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["register", "--synthetic", "--outlier-ratio", "1.5"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["bench", "--ratios", "abc"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["register", "--input", "missing.ply"]).status.code(), Some(1));
    std::fs::write(dir.path().join("bad.g2o"), "VERTEX_SE2 0 zero 0 0\n").unwrap();
    let out = run(dir.path(), &["pgo", "--input", "bad.g2o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1"));
}

#[test]
fn bench_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "bench", "--methods", "none,esor,gnc-tls", "--ratios", "0.2,0.6", "--mc-runs", "3", "--no-timing",
            "--seed", "42", "--out-dir", out,
        ]
    };
    assert!(run(dir.path(), &args("a")).status.success());
    let mut b = args("b");
    b.extend(["--workers", "1"]);
    assert!(run(dir.path(), &b).status.success());
    let a = std::fs::read(dir.path().join("a/records.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/records.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 3 * 2 * 3);
}

#[test]
fn stopping_rule_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "bench", "--methods", "esor,asor", "--ratios", "0.3", "--mc-runs", "4", "--no-timing",
            "--stopping-rule", "max-weighted-residual", "--out-dir", "o",
        ],
    );
    assert!(out.status.success());
    let m = json(dir.path().join("o/manifest.json"));
    assert_eq!(m["config"]["options"]["robust"]["stopping_rule"], "MAX_WEIGHTED_RESIDUAL");
    let csv = std::fs::read_to_string(dir.path().join("o/records.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.ends_with("MAX_WEIGHTED_RESIDUAL_MET")));
}

#[test]
fn pgo_bench_writes_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "bench", "--problem", "pgo", "--methods", "gnc-tls", "--ratios", "0.2", "--mc-runs", "2",
            "--n-poses", "30", "--loop-closures", "8", "--no-timing", "--out-dir", "o",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = robust_bayes::io::read_records_csv(dir.path().join("o/records.csv")).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| r.trajectory_rmse.is_some_and(|v| v.is_finite())));
}
