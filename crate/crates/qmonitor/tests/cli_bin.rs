//! End-to-end checks of the installed binary: config parsing, flag
//! overrides, exit codes, and the numeric content of emitted files.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qmonitor"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn registry_lists_everything_and_is_stable() {
    let a = bin().arg("registry").output().unwrap();
    let b = bin().arg("registry").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for needle in [
        "trajectory", "ensemble", "collapse-scan", "weak-limit", "zeno",
        "bias-report", "retro-energy", "two_level_monitor", "omega, epsilon, rate",
    ] {
        assert!(text.contains(needle), "registry is missing {needle}");
    }
}

#[test]
fn zeno_without_monitoring_reproduces_rabi_oscillation() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("zeno-out").to_string_lossy().into_owned();
    let config = write_config(
        dir.path(),
        "zeno.json",
        &format!(
            r#"{{
                "scenario": "zeno",
                "model": {{ "name": "two_level_monitor",
                            "params": {{ "rate": 20.0, "epsilon": 0.0, "omega": 1.0 }} }},
                "grid": {{ "t0": 0.0, "t1": 1.2, "dt": 1.2 }},
                "n_traj": 300,
                "master_seed": 5,
                "output": {{ "path": "{}" }}
            }}"#,
            stem.replace('\\', "/")
        ),
    );
    let out = bin().args(["simulate", &config]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(format!("{stem}.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,epsilon,survival,stderr");
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let expect = (1.0_f64 * 1.2 / 2.0).cos().powi(2);
    // eps = 0 monitoring never disturbs the state, so the estimate is exact
    // up to roundoff and the 3-stderr band collapses
    assert!((row[2] - expect).abs() < 1e-6, "survival {} vs {expect}", row[2]);
}

#[test]
fn flag_overrides_land_in_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("bias-out").to_string_lossy().into_owned();
    let config = write_config(
        dir.path(),
        "bias.json",
        r#"{
            "scenario": "bias-report",
            "model": { "name": "amplitude_damping", "params": { "p": 0.1 } },
            "output": { "path": "overridden-below" }
        }"#,
    );
    let out = bin()
        .args([
            "simulate", &config,
            "--out", &stem,
            "--seed", "99",
            "--param", "p=0.36",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{stem}.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["master_seed"], 99);
    assert_eq!(summary["config"]["model"]["params"]["p"], 0.36);
    let rev = summary["metrics"]["reversed_defect"].as_f64().unwrap();
    assert!((rev - 0.36).abs() < 1e-12);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "bad.json", "{ not json");
    let out = bin().args(["simulate", &config]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("nope.json").to_string_lossy().into_owned();
    let out = bin().args(["simulate", &missing]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn step_guard_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("guard").to_string_lossy().into_owned();
    let config = write_config(
        dir.path(),
        "guard.json",
        &format!(
            r#"{{
                "scenario": "ensemble",
                "model": {{ "name": "two_level_monitor",
                            "params": {{ "epsilon": 0.3, "rate": 50.0 }} }},
                "grid": {{ "t0": 0.0, "t1": 1.0, "dt": 0.1 }},
                "n_traj": 2,
                "output": {{ "path": "{}" }}
            }}"#,
            stem.replace('\\', "/")
        ),
    );
    let out = bin().args(["simulate", &config]).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("traj-out").to_string_lossy().into_owned();
    let config = write_config(
        dir.path(),
        "traj.json",
        &format!(
            r#"{{
                "scenario": "trajectory",
                "model": {{ "name": "two_level_monitor",
                            "params": {{ "epsilon": 0.5, "rate": 10.0 }} }},
                "grid": {{ "t0": 0.0, "t1": 2.0, "dt": 0.05 }},
                "master_seed": 11,
                "output": {{ "path": "{}" }}
            }}"#,
            stem.replace('\\', "/")
        ),
    );
    assert!(bin().args(["simulate", &config]).output().unwrap().status.success());
    let csv1 = std::fs::read(format!("{stem}.csv")).unwrap();
    let json1 = std::fs::read(format!("{stem}.json")).unwrap();
    assert!(bin().args(["simulate", &config]).output().unwrap().status.success());
    assert_eq!(csv1, std::fs::read(format!("{stem}.csv")).unwrap());
    assert_eq!(json1, std::fs::read(format!("{stem}.json")).unwrap());
    // header contract: comma-separated with time first
    let header = String::from_utf8(csv1).unwrap();
    assert!(header.starts_with("time,"));
}
