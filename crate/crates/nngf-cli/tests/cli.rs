use std::path::Path;
use std::process::{Command, Output};

fn nngf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nngf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{
            "version": 1,
            "kernel": {"kind": "relu"},
            "d": 2,
            "depths": [4, 8],
            "replicates": 60,
            "observable": {"kind": "excursion-indicator", "level": 0.0},
            "grid": {"kind": "fibonacci-s2", "n": 200},
            "seed": 11
        }"#,
    )
    .unwrap();
    path
}

#[test]
fn relu_probe_prints_the_closed_form() {
    let out = nngf(&["kernel", "--kind", "relu", "--probe", "0"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.3183099");
}

#[test]
fn series_probe_at_one_prints_exactly_one() {
    let out = nngf(&[
        "kernel",
        "--series",
        "0.9,0,0,0,0,0,0,0,0,0.1",
        "--probe",
        "1",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "1");
}

#[test]
fn negative_coefficient_is_a_validation_error() {
    let out = nngf(&["kernel", "--series", "0.5,-0.1,0.6", "--probe", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("negative"));
}

#[test]
fn probe_outside_the_domain_is_rejected() {
    let out = nngf(&["kernel", "--kind", "relu", "--probe", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn regime_report_identifies_relu_as_sparse() {
    let out = nngf(&["regime", "--kind", "relu"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["regime"], "sparse");
    let gamma1 = json["sparse"]["gamma1"].as_f64().unwrap();
    assert!((gamma1 - 1.5).abs() < 0.01, "gamma1 {gamma1}");
}

#[test]
fn unknown_config_key_is_rejected_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"version": 1, "bogus": 3}"#).unwrap();
    let out = nngf(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_exit_2() {
    let out = nngf(&["experiment", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectrum_emits_seventeen_digit_csv() {
    let out = nngf(&["spectrum", "--kind", "relu", "--depths", "6"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().trim_end(), "depth,l,c_l,g_l");
    let first = lines.next().unwrap().trim_end();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields[0], "6");
    assert_eq!(fields[1], "0");
    // 17 significant digits in scientific notation
    assert!(fields[2].contains('e'));
    let mantissa: String = fields[2].chars().filter(|c| c.is_ascii_digit()).take(17).collect();
    assert_eq!(mantissa.len(), 17);
    let c0: f64 = fields[2].parse().unwrap();
    assert!((0.0..1.0).contains(&c0));
}

#[test]
fn simulate_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out1 = dir.path().join("w1");
    let out4 = dir.path().join("w4");
    for (workers, out) in [("1", &out1), ("4", &out4)] {
        let res = nngf(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let a = std::fs::read(out1.join("samples.csv")).unwrap();
    let b = std::fs::read(out4.join("samples.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "CSV payloads must not depend on the worker count");
}

#[test]
fn manifest_lists_every_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("run");
    let res = nngf(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap().to_string())
        .collect();
    for entry in std::fs::read_dir(&out).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name != "manifest.json" {
            assert!(listed.contains(&name), "orphan output file {name}");
        }
    }
    assert!(manifest["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn seed_override_changes_the_draws() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let base = nngf(&["simulate", "--config", config.to_str().unwrap()]);
    let reseeded = nngf(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "999",
    ]);
    assert!(base.status.success() && reseeded.status.success());
    assert_ne!(stdout(&base), stdout(&reseeded));
}

#[test]
fn verify_passes_on_a_sound_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = nngf(&["verify", "--config", config.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "verify failed:\n{}",
        stdout(&out)
    );
    let text = stdout(&out);
    assert!(text.contains("PASS determinism"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn experiment_emits_verdicts_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_dir = dir.path().join("exp");
    let out = nngf(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    assert!(text.contains("gaussian-distance"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["regime"]["regime"], "sparse");
    assert!(report["verdicts"].as_array().unwrap().len() >= 2);
}
