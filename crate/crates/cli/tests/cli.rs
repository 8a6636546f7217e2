use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sils(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sils")).args(args).output().unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(sils(&[]).status.code(), Some(1));
    assert_eq!(sils(&["solve", "--bogus"]).status.code(), Some(1));
    assert_eq!(sils(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_file_exits_one() {
    let out = sils(&["solve", "--in", "/nonexistent/instance.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn generate_solve_exact_certify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "inst.txt");
    let gen = sils(&["generate", "--model", "3", "--n", "200", "--d", "6", "--sigma", "2", "--rho", "0.1", "--seed", "3", "--out", &inst]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));

    let solve = sils(&["solve", "--in", &inst, "--round"]);
    assert!(solve.status.success());
    let exact = sils(&["exact", "--in", &inst]);
    assert!(exact.status.success());
    assert!(!exact.stdout.is_empty());

    let report = path(dir.path(), "report.txt");
    let cert = sils(&["certify", "--in", &inst, "--theorem", "f", "--report", &report]);
    assert!(cert.status.success(), "{}", String::from_utf8_lossy(&cert.stderr));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("passed true"), "{text}");
}

#[test]
fn baseline_and_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "inst.txt");
    assert!(sils(&["generate", "--model", "3", "--n", "30", "--d", "10", "--sigma", "2", "--rho", "0.5", "--out", &inst]).status.success());
    for method in ["lasso", "dantzig"] {
        let out = sils(&["baseline", "--method", method, "--param", "paper-rule", "--in", &inst]);
        assert!(out.status.success(), "{method}: {}", String::from_utf8_lossy(&out.stderr));
    }

    let x3c = path(dir.path(), "x3c.txt");
    fs::write(&x3c, "6\n1 2 3\n4 5 6\n1 4 5\n").unwrap();
    let reduced = path(dir.path(), "reduced.txt");
    assert!(sils(&["reduce-x3c", "--in", &x3c, "--out", &reduced]).status.success());
    assert!(sils(&["exact", "--in", &reduced]).status.success());
}

#[test]
fn experiment_config_runs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "exp.cfg");
    fs::write(
        &cfg,
        "experiment = recovery\nmodel = 3\nd = 8\nsigma = 2\nrho = 0.5\nc = 1, 2\ntrials = 2\nseed = 5\n",
    )
    .unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    assert_eq!(sils(&["experiment", "--config", &cfg, "--out", &a]).status.code(), Some(0));
    assert_eq!(sils(&["experiment", "--config", &cfg, "--out", &b]).status.code(), Some(0));
    let csv = fs::read_to_string(&a).unwrap();
    assert_eq!(csv, fs::read_to_string(&b).unwrap());
    assert!(csv.lines().count() > 3);
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "bad.cfg");
    fs::write(&cfg, "experiment = recovery\nmodel = 7\n").unwrap();
    assert_eq!(sils(&["experiment", "--config", &cfg]).status.code(), Some(1));
}
