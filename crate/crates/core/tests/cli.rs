use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use voi_core::model::{DelayModel, ModelSpec};

fn voi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_model(dir: &Path, name: &str, horizon: usize) -> PathBuf {
    let mut spec = ModelSpec::scalar_benchmark();
    spec.N = horizon;
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_handles_an_empty_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", 0);
    let out = dir.path().join("out");
    let res = voi(&["solve", "--model", s(&model), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let thresholds = std::fs::read_to_string(out.join("restricted_thresholds.csv")).unwrap();
    assert!(thresholds.starts_with("# audit: "));
    assert!(out.join("path_table.bin").exists());
    assert!(out.join("restricted_table.bin").exists());
}

#[test]
fn solve_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", 30);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = voi(&[
            "solve",
            "--model",
            s(&model),
            "--out",
            s(out),
            "--dump-riccati",
            "--plot",
        ]);
        assert_eq!(code(&res), 0);
    }
    for f in [
        "restricted_table.bin",
        "path_table.bin",
        "restricted_voi.csv",
        "restricted_thresholds.csv",
        "path_thresholds.csv",
        "path_thresholds.svg",
        "riccati.csv",
    ] {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        // the audit header records the output directory
        let strip = |v: Vec<u8>| {
            String::from_utf8_lossy(&v)
                .replace(s(&a), "")
                .replace(s(&b), "")
                .into_bytes()
        };
        assert_eq!(strip(x), strip(y), "{f} differs");
    }
}

#[test]
fn simulate_writes_audited_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", 40);
    let out = dir.path().join("sim");
    let res = voi(&[
        "simulate",
        "--model",
        s(&model),
        "--policy",
        "aoi-threshold:5",
        "--runs",
        "50",
        "--seed",
        "9",
        "--plot",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["trajectory.csv", "errors.csv", "ages.csv", "voi.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# audit: "), "{f}");
        assert!(lines.count() > 40, "{f}");
    }
    for f in ["errors.svg", "ages.svg", "voi.svg"] {
        assert!(std::fs::read_to_string(out.join(f)).unwrap().contains("<svg"));
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("loss_report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["n_runs"], 50);
    assert_eq!(report["audit"]["seed"], 9);
}

#[test]
fn simulate_reuses_a_cached_table() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", 25);
    let tables = dir.path().join("tables");
    assert_eq!(code(&voi(&["solve", "--model", s(&model), "--out", s(&tables)])), 0);
    let cache = tables.join("restricted_table.bin");
    let run = |model: &Path, out: &str| {
        voi(&[
            "simulate",
            "--model",
            s(model),
            "--policy",
            "restricted-voi",
            "--table",
            s(&cache),
            "--runs",
            "20",
            "--out",
            s(&dir.path().join(out)),
        ])
    };
    assert_eq!(code(&run(&model, "cached")), 0);

    let other = write_model(dir.path(), "other.json", 26);
    let res = run(&other, "stale");
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("different horizon"));
}

#[test]
fn sweep_writes_a_curve() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.json", 30);
    let out = dir.path().join("sweep");
    let res = voi(&[
        "sweep",
        "--model",
        s(&model),
        "--family",
        "periodic",
        "--values",
        "1,2,4",
        "--runs",
        "20",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn oracle_defaults_match() {
    let dir = tempfile::tempdir().unwrap();
    let res = voi(&["oracle", "--out", s(dir.path())]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    let text = std::fs::read_to_string(dir.path().join("oracle.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["oracle"].as_array().unwrap().len(), 4);
}

#[test]
fn oracle_refuses_long_horizons() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ModelSpec::scalar_benchmark();
    spec.N = 6;
    spec.delay = DelayModel::None;
    let p = dir.path().join("long.json");
    std::fs::write(&p, serde_json::to_string(&spec).unwrap()).unwrap();
    let res = voi(&[
        "oracle",
        "--kind",
        "restricted",
        "--model",
        s(&p),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(code(&voi(&["simulate", "--config", "/nonexistent/experiment.json"])), 2);
    assert_eq!(
        code(&voi(&["simulate", "--policy", "periodic:0", "--model", "x.json"])),
        2
    );
    assert_eq!(code(&voi(&["frobnicate"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"A": [[1.0]], "N": 3}"#).unwrap();
    assert_eq!(code(&voi(&["solve", "--model", s(&bad), "--out", s(dir.path())])), 2);
}
