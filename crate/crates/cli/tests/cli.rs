use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qaction"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--config", "/nonexistent/x.action", "--out", dir.path().to_str().unwrap(), "oracle"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains(r#""error":"config_not_found""#), "{}", text(&out.stderr));
}

#[test]
fn malformed_config_and_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.action");
    fs::write(&bad, "dimension = 1\nmass = 1\nv2 = 1\nspin = 3\n").unwrap();
    let out = run(&["--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "oracle"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("config_invalid"));

    let cfg = config("pullen_edmonds.action");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "poincare", "--tau", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["--out", dir.path().to_str().unwrap(), "extrapolate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("sweep_not_found"));
    let out = run(&["oracle", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_reports_the_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("quartic_1d.action");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "oracle"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("E_gr=0.71080"));
    let table = fs::read_to_string(dir.path().join("amplitudes.csv")).unwrap();
    assert!(table.starts_with("# qaction "));
    assert_eq!(table.lines().filter(|l| l.starts_with("1,")).count(), 66);
    for f in ["spectrum.csv", "psi0.csv"] {
        assert!(dir.path().join(f).exists());
    }
}

#[test]
fn sweep_with_an_unsolvable_temperature_keeps_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = config("harmonic_1d.action");
    let cfg = cfg.to_str().unwrap();
    let out = run(&["--config", cfg, "--out", d, "oracle", "--times", "1,2"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let mut table = fs::read_to_string(dir.path().join("amplitudes.csv")).unwrap();
    // a single record cannot determine five parameters
    table.push_str("1,3.0000000000000000e-1,3.0000000000000000e-1,1.5000000000000000e0,3.0000000000000000e-1\n");
    let injected = dir.path().join("injected.csv");
    fs::write(&injected, table).unwrap();

    let out = run(&["--config", cfg, "--out", d, "sweep", "--table", injected.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("sweep_partial_failure"));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let temps: Vec<&str> = csv.lines().skip(2).map(|l| l.split(',').next().unwrap()).collect();
    assert!(temps.contains(&"1.0000000000000000e0") && temps.contains(&"2.0000000000000000e0"));
    assert!(!temps.contains(&"1.5000000000000000e0"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(json["failures"], 1);
    assert_eq!(json["entries"][1]["error_kind"], "insufficient_data");
}

#[test]
fn harmonic_fit_recovers_the_classical_action() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = config("harmonic_1d.action");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", d, "sweep", "--times", "1,3,5"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    for line in csv.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        let v: f64 = f[3].parse().unwrap();
        let expected = match f[2] {
            "m" => 1.0,
            "v2" => 0.5,
            "v4" | "v6" => 0.0,
            _ => continue,
        };
        assert!((v - expected).abs() < 1e-4, "{line}");
    }
}

#[test]
fn sections_are_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("pullen_edmonds.action");
    for dir in [&a, &b] {
        let out = run(&[
            "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "11", "--threads", "2",
            "poincare", "--energy", "20", "--seeds", "6", "--max-crossings", "40",
        ]);
        assert!(out.status.success(), "{}", text(&out.stderr));
    }
    let name = "section_E20_tauinf.csv";
    let x = fs::read(a.path().join(name)).unwrap();
    assert_eq!(x, fs::read(b.path().join(name)).unwrap());
    assert_eq!(text(&x).lines().filter(|l| !l.starts_with('#')).count(), 1 + 6 * 40);
}

#[test]
fn decoupled_comparison_is_flagged_integrable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("decoupled_2d.action");
    let out = run(&[
        "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
        "compare", "--energy", "10", "--perturb", "1e-6", "--seeds", "8", "--max-crossings", "60",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("comparison_E10_perturbed0.000001.json")).unwrap()).unwrap();
    assert_eq!(json["integrable"], true);
    assert!(json["distance"].as_f64().unwrap() < 1e-4);
}
