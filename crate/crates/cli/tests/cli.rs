use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn corpus(rel: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    root.join(rel).to_string_lossy().into_owned()
}

fn ebs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebs")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn check_edp_example_c_json() {
    let o = ebs(&["--format", "json", "check-edp", "--sigma", "Q", &corpus("examples/example_c.fol")]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["edp"], true);
    assert_eq!(v["B"], 3);
}

#[test]
fn check_edp_failure_exits_one() {
    let o = ebs(&["check-edp", "--sigma", "P,Q", &corpus("examples/example_c.fol")]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("not EDP"));
}

#[test]
fn spectrum_lists_sizes() {
    let o = ebs(&["spectrum", "--nmax", "4", &corpus("examples/two_distinct.fol")]);
    assert_eq!((code(&o), stdout(&o).trim()), (0, "2 3 4"));
}

#[test]
fn translate_equispectral() {
    let o = ebs(&["translate", "--mode", "equispectral", "--bound", "2", &corpus("examples/serial.fol")]);
    assert_eq!(stdout(&o).trim(), "exists x1. exists x2. forall x. P(x, x1) | P(x, x2)");
}

#[test]
fn sat_exit_codes() {
    assert_eq!(code(&ebs(&["sat", "--bound", "2", &corpus("examples/serial.fol")])), 0);
    assert_eq!(code(&ebs(&["sat", "--bound", "3", &corpus("examples/unsat_q.fol")])), 1);
    let dag = ebs(&["sat", "--interleaved", "--budget", "4,2,100000", &corpus("examples/dag.fol")]);
    assert_eq!((code(&dag), stdout(&dag).trim()), (2, "UNKNOWN"));
}

#[test]
fn usage_errors_exit_three() {
    assert_eq!(code(&ebs(&["frobnicate"])), 3);
    assert_eq!(code(&ebs(&["spectrum", &corpus("examples/serial.fol")])), 3);
    assert_eq!(code(&ebs(&["spectrum", "--nmax", "2", "/nonexistent.fol"])), 3);
    assert_eq!(code(&ebs(&["--help"])), 0);
    assert_eq!(code(&ebs(&["--version"])), 0);
}

#[test]
fn parse_error_reports_position() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ebs"))
        .args(["normalize", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"vocab P/1;\nforall x. P(x,x)").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("2:"));
}

#[test]
fn cap_exceeded_exits_four() {
    let o = ebs(&["--max-ground", "10", "spectrum", "--nmax", "3", &corpus("examples/serial.fol")]);
    assert_eq!(code(&o), 4);
}

#[test]
fn oracle_and_bound_search() {
    let serial = corpus("examples/serial.fol");
    assert_eq!(code(&ebs(&["ebs-oracle", "--sigma", "", "--bound", "1", "--nmax", "4", &serial])), 0);
    assert_eq!(code(&ebs(&["ebs-oracle", "--sigma", "P", "--bound", "2", "--nmax", "4", &serial])), 1);
    assert_eq!(code(&ebs(&["find-bound", "--bmax", "3", "--ncap", "4", &serial])), 1);
    let o = ebs(&["find-bound", "--bmax", "4", "--ncap", "4", &serial]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("B=4"), "{}", stdout(&o));
}

#[test]
fn equivalence_between_files() {
    let dir = tempfile::tempdir().unwrap();
    let psi = dir.path().join("psi.fol");
    std::fs::write(&psi, "vocab P/2;\nexists x1 x2. forall x. P(x, x1) | P(x, x2)\n").unwrap();
    let o = ebs(&["equiv", &corpus("examples/serial.fol"), psi.to_str().unwrap(), "--ncap", "3"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("differ"));
    let o = ebs(&["equiv", &corpus("examples/serial.fol"), psi.to_str().unwrap(), "--ncap", "2"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn spectrum_synthesis() {
    let o = ebs(&["spectrum-to-bsr", "--sizes", "2"]);
    assert_eq!(stdout(&o).trim(), "exists x1. exists x2. forall y. x1 != x2 & (y = x1 | y = x2)");
}

#[test]
fn bmc_reports_bound() {
    let o = ebs(&["--format", "json", "bmc", "--k", "1", &corpus("bmc/reach.fol")]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["k"], 1);
    assert_eq!(v["result"]["verdict"], "SAT");
    assert_eq!(code(&ebs(&["bmc", "--k", "2", &corpus("bmc/closed.fol")])), 1);
}

#[test]
fn dimacs_export_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.cnf");
    let o = ebs(&["export-dimacs", "-o", out.to_str().unwrap(), &corpus("bsr/b02.fol")]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.lines().any(|l| l.starts_with("p cnf ")));
}

#[test]
fn outputs_are_deterministic() {
    for args in [
        vec!["--format", "json", "classify"],
        vec!["--format", "json", "translate", "--bound", "3"],
        vec!["--format", "json", "spectrum", "--nmax", "3"],
    ] {
        let mut a = args.clone();
        let path = corpus("examples/example_a.fol");
        a.push(&path);
        assert_eq!(ebs(&a).stdout, ebs(&a).stdout);
    }
}
