//! End-to-end checks of the `bolab` binary: config validation with full
//! error lists, experiment runs with their artifact files, manifest
//! round-trips, and the documented exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bolab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bolab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_reports_every_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "experiment = \"stationary\"\nmystery = 1\n[sim]\ndt = 0.0\nalpha = 1.5\n",
    );
    let out = bolab(&["validate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mystery"), "{err}");
    assert!(err.contains("dt"), "{err}");
    assert!(err.contains("alpha"), "{err}");
}

#[test]
fn validate_accepts_minimal_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ok.toml", "experiment = \"recurrence\"\n");
    let out = bolab(&["validate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fingerprint"));
}

#[test]
fn conservation_run_produces_artifacts_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "cons.toml",
        "experiment = \"conservation\"\n[sim]\nn_modes = 64\ndt = 0.001\nt_final = 0.05\nsample_every = 10\n",
    );
    let out_dir = tmp.path().join("out");
    let out = bolab(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("PASS"), "{stdout}");
    for artifact in ["manifest.toml", "verdicts.txt", "verdicts.json", "trajectory.jsonl"] {
        assert!(out_dir.join(artifact).is_file(), "missing {artifact}");
    }
    let manifest = std::fs::read_to_string(out_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("completed = true"));

    let show = bolab(&["show-manifest", out_dir.to_str().unwrap()], tmp.path());
    assert_eq!(show.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&show.stdout).contains("fingerprint"));
}

#[test]
fn checkpoints_written_and_decodable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "cons.toml",
        "experiment = \"conservation\"\n[sim]\nn_modes = 64\ndt = 0.001\nt_final = 0.04\nsample_every = 10\ncheckpoint_every = 20\n",
    );
    let out_dir = tmp.path().join("out");
    let out = bolab(
        &["run", "--config", cfg.to_str().unwrap(), "--output", out_dir.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let index = std::fs::read_to_string(out_dir.join("checkpoints/index.csv")).unwrap();
    assert!(index.lines().count() >= 3, "{index}"); // header + 2 checkpoints
    let bytes = std::fs::read(out_dir.join("checkpoints/checkpoint_000000.field")).unwrap();
    let field = bolab_core::spectral::Field::from_bytes(&bytes).unwrap();
    assert_eq!(field.grid().n_modes(), 64);
    assert!(bolab_core::spectral::sobolev_norm(&field, 0.0) > 0.5);
}

#[test]
fn failed_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    // an impossible recurrence tolerance over a tiny horizon: hard failure
    let cfg = write(
        tmp.path(),
        "rec.toml",
        "experiment = \"recurrence\"\n[sim]\nn_modes = 32\ndt = 0.002\nt_final = 2.0\nsample_every = 25\n[recurrence]\ntol_rel = 1e-9\n",
    );
    let out_dir = tmp.path().join("out");
    let out = bolab(
        &["run", "--config", cfg.to_str().unwrap(), "--output", out_dir.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn blow_up_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "blow.toml",
        "experiment = \"recurrence\"\n[sim]\nn_modes = 32\ndt = 0.002\nt_final = 2.0\n[recurrence]\namplitude = 1e7\n",
    );
    let out_dir = tmp.path().join("out");
    let out = bolab(
        &["run", "--config", cfg.to_str().unwrap(), "--output", out_dir.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_experiment_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bolab(&["run", "gibberish"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown experiment"));
}
