use std::path::Path;
use std::process::Command;

use relaybeam::harness::{parse_csv, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relaybeam"))
}

fn repo_config() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

#[test]
fn shipped_config_is_the_default() {
    let c = ExperimentConfig::load(&repo_config()).unwrap();
    assert_eq!(c, ExperimentConfig::default());
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "num_slots = 4\ntrajectories = true\ninitial_positions = [[40.0, 40.0], [45.0, 55.0]]\n").unwrap();
    let out = dir.path().join("out");
    let o = bin()
        .args(["simulate", "--trials", "2", "--policy", "selective", "--policy", "static", "--debug-jensen", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.contains("PASS jensen"));

    let recs = parse_csv(std::fs::File::open(out.join("slots.csv")).unwrap()).unwrap();
    assert_eq!(recs.len(), 2 * 2 * 4);
    assert!(recs.iter().all(|r| r.positions.len() == 2));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["records"], 16);
    assert_eq!(summary["aggregates"].as_array().unwrap().len(), 2);
    assert_eq!(summary["jensen"].as_array().unwrap().len(), 2 * 3);

    let traj = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 16 * 2);
}

#[test]
fn bad_inputs_exit_nonzero_with_a_message() {
    let o = bin().args(["simulate", "--policy", "teleport"]).output().unwrap();
    assert!(!o.status.success());

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "trials = 1\nnum_slots = 1\n").unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&blocker.display().to_string()), "{err}");

    let o = bin().args(["simulate", "--config", "/nonexistent/relay.toml"]).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/relay.toml"));
}

#[test]
fn validate_reports_each_check() {
    let o = bin().args(["validate", "--suite", "eigen"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 4);
    assert!(!stdout.contains("FAIL"));
}
