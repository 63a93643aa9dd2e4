use std::path::Path;
use std::process::{Command, Output};

fn hlab(dir: &Path, subcommand: &str, config: &str) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hlab"))
        .args([subcommand, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hlab(dir.path(), "sweep", "experiment.kind = homogenize\ncell.size = 3\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cell.size"));
}

#[test]
fn conflicting_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hlab(dir.path(), "kernel", "experiment.kind = homogenize\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_needs_a_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = hlab(dir.path(), "sweep", "cell.n = 16\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn homogenize_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = hlab(dir.path(), "homogenize", "coeff.name = laminate\ncell.n = 64\n");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS closed_form_error"));
    for file in ["homogenize.csv", "homogenize.json"] {
        assert!(dir.path().join("out").join(file).is_file());
    }
}

#[test]
fn cell_writes_correctors() {
    let dir = tempfile::tempdir().unwrap();
    let out = hlab(dir.path(), "cell", "coeff.name = separable\nsystem.m = 2\ncoeff.coupling = 0.2\ncell.n = 16\n");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/homogenized.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("out/correctors.hlcs").is_file());
}

#[test]
fn failed_stage_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = "experiment.kind = rellich-sweep\nsweep.eps = 1/4, 1/8, 1/16\nsolver.hrule = 6\ncell.n = 16\ndata.F = constant-balanced(1)\n";
    let out = hlab(dir.path(), "sweep", config);
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("out/rellich-sweep.csv")).unwrap();
    assert!(csv.contains("error:"));
}
