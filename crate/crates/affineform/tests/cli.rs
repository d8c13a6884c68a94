//! End-to-end checks of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_affineform"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("affineform-cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn fixtures_lists_all_twelve() {
    let out = bin().arg("fixtures").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 12);
    assert!(stdout.contains("case1-nominal"));
    assert!(stdout.contains("case2-colinear"));
}

#[test]
fn repeated_seeded_runs_are_bit_identical() {
    let dir = temp_dir("determinism");
    for run in ["a", "b"] {
        let status = bin()
            .args([
                "simulate",
                "case1-nominal",
                "--seed",
                "7",
                "--t-end",
                "2.0",
                "--out",
            ])
            .arg(dir.join(run))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in ["states.csv", "events.csv", "plot.csv"] {
        assert_eq!(
            read(&dir.join("a").join(file)),
            read(&dir.join("b").join(file)),
            "{file} differs between identical seeded runs"
        );
    }
}

#[test]
fn report_prints_one_column_per_agent() {
    let dir = temp_dir("report");
    assert!(bin()
        .args(["simulate", "case1-nominal", "--seed", "3", "--t-end", "2.0", "--out"])
        .arg(&dir)
        .status()
        .unwrap()
        .success());
    let out = bin().arg("report").arg(&dir).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let agent_row = stdout.lines().find(|l| l.starts_with("agent")).unwrap();
    let columns: Vec<&str> = agent_row.split_whitespace().skip(1).collect();
    assert_eq!(columns.len(), 10);
}

#[test]
fn design_fails_on_unstabilizable_plant() {
    // uncontrollable unstable mode: A diag(1, 2), B touching only state 1
    let dir = temp_dir("design-fail");
    let mut config = affineform::scenario::fixture("case1-nominal").unwrap();
    config.plant.a = vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]];
    config.plant.b = vec![vec![1.0], vec![0.0], vec![0.0]];
    let path = dir.join("bad.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    let out = bin().arg("design").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("not stabilizable"),
        "stderr should name the failure: {stderr}"
    );
}

#[test]
fn design_writes_gains_for_bundled_scenario() {
    let dir = temp_dir("design-ok");
    let path = dir.join("gains.toml");
    let out = bin()
        .args(["design", "case1-nominal", "--output"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let design = affineform::design::ControllerDesign::load(&path).unwrap();
    let p_ref = affineform::fixtures::case1_reference_p();
    for i in 0..3 {
        for j in 0..3 {
            assert!((design.p[(i, j)] - p_ref[(i, j)]).abs() <= 0.02);
        }
    }
}

#[test]
fn validate_stress_accepts_solver_output_and_rejects_garbage() {
    let dir = temp_dir("validate");
    // solver output round-tripped through CSV passes at solver grade
    let formation = affineform::fixtures::case1_formation();
    let stress = affineform::compute_stress(
        &formation,
        &affineform::stress::StressSolverOptions::default(),
    )
    .unwrap();
    let good = dir.join("omega.csv");
    stress.save_csv(&good).unwrap();
    let out = bin()
        .args(["validate-stress", "--formation", "case1-nominal", "--omega"])
        .arg(&good)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));

    // the zero matrix fails (rank 0)
    let bad = dir.join("zero.csv");
    affineform::stress::write_matrix_csv(&nalgebra::DMatrix::zeros(10, 10), &bad).unwrap();
    let out = bin()
        .args(["validate-stress", "--formation", "case1-nominal", "--omega"])
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn simulate_rejects_invalid_overrides() {
    let out = bin()
        .args(["simulate", "case1-nominal", "--integrator", "verlet"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    // switching a state-only scenario to output mode names the missing data
    let out = bin()
        .args(["simulate", "case1-nominal", "--mode", "output"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("plant.c"), "stderr: {stderr}");
}

#[test]
fn scenario_file_with_mu_zero_fails_validation_by_name() {
    let dir = temp_dir("mu-zero");
    let mut config = affineform::scenario::fixture("case1-nominal").unwrap();
    config.triggers.mu_leader = 0.0;
    let path = dir.join("bad.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    let out = bin().arg("simulate").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("mu_leader > 0"), "stderr: {stderr}");
}
