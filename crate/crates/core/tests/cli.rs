//! End-to-end runs of the `frlevy` binary.

use std::path::Path;
use std::process::{Command, Output};

fn frlevy(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frlevy"))
        .current_dir(dir)
        .env_remove("FRLEVY_SEED")
        .args(args)
        .output()
        .expect("spawn frlevy")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(2)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const HEAT_STEADY: &str = r#"
command = "solve-heat"
beta0 = 0.25
beta = [0.3]
forcing = 1.0
[model]
kind = "finite"
rate = 0.0
[domain]
cells = [32]
horizon = 5.0
steps = 50
"#;

const FIELD: &str = r#"
command = "simulate-field"
beta = [0.3, 0.2]
replicas = 3
[field]
lower = [0.0, 0.0]
upper = [1.0, 1.0]
cells = [2, 2]
"#;

#[test]
fn heat_steady_state_at_midpoint() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "heat.toml", HEAT_STEADY);
    let out = frlevy(dir.path(), &["solve-heat", "--config", "heat.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/heat.csv")).unwrap();
    let mut lines = csv.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# config_hash="), "{first}");
    assert!(first.ends_with(" seed=2024"), "{first}");
    assert_eq!(lines.next(), Some("t,x1,value"));
    let mid = rows(&csv)
        .into_iter()
        .find(|r| r[0] == 5.0 && r[1] == 0.5)
        .expect("row at t=5, x=0.5");
    assert!((mid[2] - 0.25).abs() < 1e-4, "{}", mid[2]);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", "command = \"solve-heat\"\nbeta0 = 0.25\nbeta = [0.7]\nbogus = 1\n");
    let out = frlevy(dir.path(), &["solve-heat", "--config", "bad.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta[1] out of (0, 0.5)"), "{err}");
    assert!(err.contains("bogus: unknown key"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_subcommand_is_a_parameter_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = frlevy(dir.path(), &["solve-wave"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn field_runs_are_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "field.toml", FIELD);
    let run = |seed: &str, out: &str| {
        let o = frlevy(dir.path(), &["simulate-field", "--config", "field.toml", "--seed", seed, "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(dir.path().join(out).join("field.csv")).unwrap()
    };
    let a = run("7", "a");
    let b = run("7", "b");
    let c = run("8", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.lines().next().unwrap().ends_with(" seed=7"));
    // the field vanishes when any coordinate is zero
    for r in rows(&a) {
        if r[0] == 0.0 || r[1] == 0.0 {
            assert_eq!(r[2], 0.0);
        }
    }
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "field.toml", FIELD);
    let out = Command::new(env!("CARGO_BIN_EXE_frlevy"))
        .current_dir(dir.path())
        .env("FRLEVY_SEED", "99")
        .args(["simulate-field", "--config", "field.toml", "--out", "o"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("o/field.csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with(" seed=99"));
}

#[test]
fn quasilinear_writes_iteration_log() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "q.toml",
        "command = \"solve-quasilinear\"\nbeta0 = 0.25\nbeta = [0.3]\ninitial = \"sine\"\n\
         [nonlinearity]\nkind = \"sine\"\n[domain]\ncells = [16]\nhorizon = 0.5\nsteps = 25\n",
    );
    let out = frlevy(dir.path(), &["solve-quasilinear", "--config", "q.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(dir.path().join("o/picard.csv")).unwrap();
    assert_eq!(log.lines().nth(1), Some("replica,iteration,difference"));
    let diffs: Vec<f64> = rows(&log).iter().map(|r| r[2]).collect();
    assert!(diffs.len() >= 3 && diffs.len() <= 15, "{diffs:?}");
    assert!(*diffs.last().unwrap() <= 1e-8);
}

#[test]
fn picard_violation_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "q.toml",
        "command = \"solve-quasilinear\"\nbeta0 = 0.2\nbeta = [0.2, 0.2, 0.2, 0.2]\n[nonlinearity]\nkind = \"sine\"\n",
    );
    let out = frlevy(dir.path(), &["solve-quasilinear", "--config", "q.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("picard"));
    assert!(!dir.path().join("o").exists());
}
