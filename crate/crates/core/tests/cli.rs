use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedmimo"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fedmimo")
}

fn write_cfg(dir: &Path, text: &str) -> String {
    let p = dir.join("case.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_default_config() {
    let cfg = configs().join("default.cfg");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "status,iterations,min_eff_rate_bps,final_z_bps,initial_z_bps,f_hz,wall_time_s");
    assert!(lines[1].starts_with("converged,"));
}

#[test]
fn solve_writes_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.cfg");
    let out_dir = dir.path().join("out");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--seed", "2", "--trace", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iteration,z_bps,min_eff_rate_bps,newton_iters");
    assert!(trace.lines().nth(1).unwrap().starts_with("0,"));
    assert_eq!(fs::read_to_string(out_dir.join("solve.csv")).unwrap().lines().count(), 2);
}

#[test]
fn malformed_key_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "M = 100\nantenna_count = 64\n");
    let out = run(&["solve", "--config", &cfg, "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("antenna_count"));
}

#[test]
fn bad_value_exits_one_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "t_qos = soon\n");
    let out = run(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_qos"));
}

#[test]
fn missing_config_and_bad_arguments_exit_one() {
    assert_eq!(run(&["solve", "--config", "/nonexistent/fedmimo.cfg"]).status.code(), Some(1));
    assert_eq!(run(&["solve"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let cfg = configs().join("default.cfg");
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--var", "Q", "--values", "1", "--out", "/tmp"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unreachable_deadline_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "t_qos = 0.001\n");
    let out = run(&["solve", "--config", &cfg, "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("infeasible-instance,"));
}

#[test]
fn sweep_headers_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.cfg");
    let sweep = |out: &Path| {
        let o = run(&[
            "sweep", "--config", cfg.to_str().unwrap(), "--var", "M", "--values", "40,60", "--trials", "3", "--seed", "5",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(out.join("sweep_M_trials.csv")).unwrap(), fs::read(out.join("sweep_M_summary.csv")).unwrap())
    };
    let a = sweep(&dir.path().join("a"));
    let b = sweep(&dir.path().join("b"));
    assert_eq!(a, b);
    let trials = String::from_utf8(a.0).unwrap();
    let summary = String::from_utf8(a.1).unwrap();
    assert_eq!(
        trials.lines().next().unwrap(),
        "value,trial,seed,min_eff_rate_alg1_bps,min_eff_rate_bl_bps,bl_feasible,iterations,status"
    );
    assert_eq!(trials.lines().count(), 1 + 2 * 3);
    assert_eq!(
        summary.lines().next().unwrap(),
        "value,trials,included,excluded,alg1_mean_bps,alg1_std_bps,bl_mean_bps,bl_std_bps"
    );
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn oracle_rows() {
    let cfg = configs().join("tiny.cfg");
    let out = run(&["oracle", "--config", cfg.to_str().unwrap(), "--seed", "4", "--steps", "9", "--rounds", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "seed,oracle_bps,alg1_bps,relative_gap,oracle_status,alg1_status");
    assert!(text.lines().nth(1).unwrap().starts_with("4,"));

    let dir = tempfile::tempdir().unwrap();
    let tight = write_cfg(dir.path(), "L = 1\nK = 1\nt_qos = 0.001\n");
    let out = run(&["oracle", "--config", &tight, "--seed", "4", "--steps", "5", "--rounds", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let row = String::from_utf8(out.stdout).unwrap();
    assert!(row.contains("infeasible,infeasible-instance"), "{row}");

    let big = configs().join("default.cfg");
    assert_eq!(run(&["oracle", "--config", big.to_str().unwrap()]).status.code(), Some(1));
}
