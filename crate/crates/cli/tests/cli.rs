use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const HEADER: &str = "σ,m,lambda_p,lambda_v,cw_lower,cw_upper,iv_lo,iv_hi,n_nodes,h,existence,wall_ms";

const SWEEP: &str = r#"
kind = "sweep"

[grid]
lower = [0.0]
upper = [1.0]
nodes = [64]

[kernel]
variant = "convolution"
family = "uniform"
radius = 1.0
sigma = 0.2
m = 2.0

[study]
sigmas = [0.4, 0.2, 0.1]
nodes_per_sigma = 16
ms = [0.0, 2.0]
"#;

fn nlspec(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nlspec"));
    cmd.args(args).env_remove("NLSPEC_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_sweep(dir: &Path, out: &str, env: &[(&str, &str)]) -> (Output, PathBuf) {
    let cfg = write_config(dir, SWEEP);
    let out = dir.join(out);
    let o = nlspec(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        env,
    );
    (o, out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `results.csv` without the `wall_ms` column.
fn stable_csv(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn sweep_writes_header_rows_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_sweep(dir.path(), "out", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 7);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 12));
    for name in ["lambda_p_m0.dat", "lambda_p_m2.dat"] {
        let dat = fs::read_to_string(out.join("plotdata").join(name)).unwrap();
        let rows: Vec<&str> = dat.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.split(' ').count() == 2));
    }
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"kind\": \"sweep\""));
    assert!(manifest.contains("\"version\""));
}

#[test]
fn deterministic_modulo_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let (a, out_a) = run_sweep(dir.path(), "a", &[("NLSPEC_THREADS", "1")]);
    let (b, out_b) = run_sweep(dir.path(), "b", &[("NLSPEC_THREADS", "3")]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(stable_csv(&out_a.join("results.csv")), stable_csv(&out_b.join("results.csv")));
}

#[test]
fn env_threads_override_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let out = dir.path().join("t");
    let o = nlspec(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "4"],
        &[("NLSPEC_THREADS", "2")],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"threads\": 2"), "{manifest}");
}

#[test]
fn invalid_config_exits_one_with_all_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = SWEEP.replace("m = 2.0", "m = 2.5").replace("sigma = 0.2", "sigma = 0.2\nsgima = 1.0");
    let cfg = write_config(dir.path(), &text.replace("[study]", "[study]\ntypo = 1"));
    let o = nlspec(&["sweep", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line "), "{err}");
    assert!(err.contains("sgima") && err.contains("typo"), "{err}");
}

#[test]
fn range_error_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SWEEP.replace("ms = [0.0, 2.0]", "ms = [0.0, 2.5]"));
    let o = nlspec(&["sweep", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("m must lie in [0,2]"));
}

#[test]
fn resolution_error_message() {
    let dir = tempfile::tempdir().unwrap();
    let text = SWEEP
        .replace("kind = \"sweep\"", "kind = \"eig\"")
        .replace("nodes = [64]", "nodes = [8]");
    let cfg = write_config(dir.path(), &text);
    let o = nlspec(&["eig", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("resolution rule"), "{}", stderr(&o));
}

#[test]
fn kind_mismatch_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let o = nlspec(&["eig", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not match"));
    let o = nlspec(&["eig", "--config", "/nonexistent/config.toml"], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/config.toml"));
    let o = nlspec(&["frobnicate", "--config", "x"], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_all_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kind = \"check_all\"\nseed = 11\n[study]\ninstances = 4\n");
    let out = dir.path().join("c");
    let o = nlspec(&["check_all", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let checks = fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(checks.lines().skip(1).all(|l| l.split(',').nth(1) == Some("true")), "{checks}");
}

#[test]
fn strict_turns_warnings_into_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // sharp cusp under a wide kernel: no eigenpair
    let text = r#"
kind = "eig"
operator = "L_plus_a"

[grid]
lower = [-1.0]
upper = [1.0]
nodes = [256]

[kernel]
variant = "convolution"
family = "uniform"
radius = 1.0
sigma = 2.5
m = 0.0

[coefficient]
family = "power_cusp"
nu = 1.0
center = [0.0]
beta = 0.5
"#;
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("s");
    let args = ["eig", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let lax = nlspec(&args, &[]);
    assert_eq!(lax.status.code(), Some(0), "{}", stderr(&lax));
    assert!(stderr(&lax).contains("warning"), "{}", stderr(&lax));
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(nlspec(&strict, &[]).status.code(), Some(2));
}
