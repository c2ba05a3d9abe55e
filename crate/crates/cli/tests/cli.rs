use std::path::Path;
use std::process::{Command, Output};

fn magg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magg"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"{
  "grid": { "n": 16, "box_length": 6.283185307179586 },
  "params": { "sigma": 1.0, "eps": 0.5, "rho1": 1.3, "rho2": 1.0,
              "eta": [0.2, 0.2], "eta_r": [0.1, 0.1], "potential": "quartic" },
  "dt": 2e-3,
  "t_end": 0.02,
  "initial_condition": {
    "type": "tanh_stripe", "width": 0.6, "amplitude": 0.8,
    "stream": { "modes": [{ "kx": 1, "ky": 1, "amplitude": 0.3, "phase": 0.0 }] }
  }
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let out = magg(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_fails() {
    let out = magg(&["simulate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_succeeds_and_lists_defaults() {
    let out = magg(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("sweep-etar") && text.contains("cfl_number 0.4"));
}

#[test]
fn run_writes_ledger_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out_dir = dir.path().join("out");
    let out = magg(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("ledger.csv").exists());
    assert!(out_dir.join("final.snap").exists());
    let ledger = std::fs::read_to_string(out_dir.join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("t,E_total,E_kin_u,"));
    assert_eq!(ledger.lines().count(), 12);
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("\"eta_r\"", "\"viscocity\": 1.0, \"eta_r\"");
    let cfg = write(dir.path(), "bad.json", &bad);
    let out = magg(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("viscocity"));

    let missing = magg(&["run", "--config", "/nonexistent.json", "--out", "/tmp"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("\"quartic\"", "\"logarithmic\", \"stabilization\": 0.0")
        .replace("\"eps\": 0.5", "\"eps\": 0.1")
        .replace("\"dt\": 2e-3", "\"dt\": 0.5, \"cfl_number\": 1.0")
        .replace("\"t_end\": 0.02", "\"t_end\": 1.0");
    let cfg = write(dir.path(), "unstable.json", &text);
    let out_dir = dir.path().join("out");
    let out = magg(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out_dir.join("failed.snap").exists());
}

#[test]
fn sweep_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out_dir = dir.path().join("sweep");
    let out = magg(&[
        "sweep-etar", "--config", &cfg, "--values", "0.1,0.01,0.001", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("sweep_report.json")).unwrap())
            .unwrap();
    assert!(report["fitted_slope"].as_f64().unwrap() > 0.9);
    assert_eq!(report["config_digest"].as_str().unwrap().len(), 64);

    let bad = magg(&[
        "sweep-etar", "--config", &cfg, "--values", "0.01,0.1", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn mollify_and_energy_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let snap = dir.path().join("m.snap");
    let out = magg(&["mollify", "--config", &cfg, "--k", "0.5", "--out", snap.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["residual"].as_f64().unwrap() <= 1e-10);
    assert!(snap.exists());

    let out = magg(&["check-energy", "--config", &cfg, "--dts", "2e-3,1e-3"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ratios"].as_array().unwrap().len(), 1);

    let out = magg(&["mollify", "--config", &cfg, "--k", "-1"]);
    assert_eq!(out.status.code(), Some(1));
}
