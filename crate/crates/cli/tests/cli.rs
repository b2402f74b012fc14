use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn weakmeter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakmeter"))
        .args(args)
        .output()
        .unwrap()
}

fn write_variant(dir: &Path, base: &str, from: &str, to: &str) -> String {
    let text = std::fs::read_to_string(scenario(base)).unwrap();
    assert!(text.contains(from), "{from}");
    let path = dir.join("variant.toml");
    std::fs::write(&path, text.replace(from, to)).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn scan_writes_both_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("anomalous_gaussian.toml");
    let out = weakmeter(&[
        "scan",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--sequential",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "weakmeter-report/1");
    assert_eq!(report["verdict"], "consistent");
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_variant(
        dir.path(),
        "anomalous_gaussian.toml",
        "observable = \"pauli_z\"",
        "observable = [[1, 1], [0, -1]]",
    );
    let out = weakmeter(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("system.observable"));

    let out = weakmeter(&["decompose", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(2));

    let out = weakmeter(&["decompose", scenario("mixed_spin1.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_weakmeter"))
        .args([
            "validate",
            scenario("anomalous_gaussian.toml").to_str().unwrap(),
        ])
        .env("WEAKMETER_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_postselection_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_variant(
        dir.path(),
        "anomalous_gaussian.toml",
        "state = [\"0.7071067811865475+0j\", \"0.7071067811865475+0j\"]",
        "state = [\"0.8660254037844386+0j\", \"0.5+0j\"]",
    );
    let out_dir = dir.path().join("out");
    let out = weakmeter(&["scan", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_dir.join("scan.csv").exists());

    let out = weakmeter(&["decompose", &cfg]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn decompose_prints_table_or_json() {
    let cfg = scenario("anomalous_fock.toml");
    let out = weakmeter(&["decompose", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for row in [
        "Ozawa term",
        "Bayesian-update term",
        "weak-variance reading",
        "FD oracle",
        "verdict",
    ] {
        assert!(text.contains(row), "{row}");
    }

    let out = weakmeter(&["decompose", cfg.to_str().unwrap(), "--json"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let gap = json["weak_variance_reading"].as_f64().unwrap() - json["total"].as_f64().unwrap();
    assert!(gap.abs() > 1.0);
}

#[test]
fn biased_meter_scan_reports_advisories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("biased_fock_meter.toml");
    let out = weakmeter(&[
        "scan",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("advisory: state_parity"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["meter"]["symmetry"]["state_parity_ok"], false);
}
