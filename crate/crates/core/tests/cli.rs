use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use paver::parser::{parse_spec, print_spec};
use paver::protocols::{build_ucp, UcpParams, ABP_PAVER, UCP_PAVER, UCP_SPEC_PAVER};
use paver::term::ratio;

fn paver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paver"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs")
}

fn bundled(name: &str) -> String {
    specs().join(name).to_str().unwrap().to_string()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn check_ucp_against_loop() {
    let o = paver(&["check", &bundled("ucp.paver"), &bundled("ucp-spec.paver"), "--mode", "rooted-branching"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("EQUIVALENT (rooted-branching)\n"), "{out}");
    assert!(out.contains("left states: 3\n"));
    assert!(out.contains("divergence: no\n"));
}

#[test]
fn check_strong_fails_with_report() {
    let o = paver(&["check", &bundled("ucp.paver"), &bundled("ucp-spec.paver"), "--mode", "strong"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("NOT EQUIVALENT (strong)\n"));
    assert!(out.contains("distinguishing: "), "{out}");
}

#[test]
fn check_different_alphabets() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(&dir, "a.paver", "proc X = a . X init X");
    let b = write(&dir, "b.paver", "proc X = b . X init X");
    for mode in ["strong", "branching", "rooted-branching"] {
        assert_eq!(paver(&["check", &a, &b, "--mode", mode]).status.code(), Some(1));
    }
}

#[test]
fn check_file_against_itself() {
    for file in ["ucp.paver", "abp.paver", "ucp-spec.paver"] {
        for mode in ["strong", "branching", "rooted-branching"] {
            let o = paver(&["check", &bundled(file), &bundled(file), "--mode", mode]);
            assert_eq!(o.status.code(), Some(0), "{file} {mode}");
        }
    }
}

#[test]
fn parse_errors_exit_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.paver", "proc X = a . \ninit X");
    let o = paver(&["check", &bad, &bundled("ucp-spec.paver")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2:"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn lts_self_loop() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "x.paver", "proc X = a . X  init X");
    let o = paver(&["lts", &f]);
    assert_eq!(stdout(&o), "pts 1 0\nstate 0 N noterm\na 0 a 0\n");
}

#[test]
fn lts_matches_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let o = paver(&["lts", &bundled("ucp.paver")]);
    assert_eq!(stdout(&o), std::fs::read_to_string(golden.join("ucp.pts")).unwrap());
    let o = paver(&["lts", &bundled("ucp.paver"), "--pi", "all=1/2"]);
    assert_eq!(stdout(&o), std::fs::read_to_string(golden.join("ucp-half.pts")).unwrap());
}

#[test]
fn lts_budget_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "two.paver", "proc X = a . b . X init X");
    let o = paver(&["lts", &f, "--limit", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("budget"), "{}", stderr(&o));
}

#[test]
fn lts_dot() {
    let o = paver(&["lts", &bundled("ucp.paver"), "--out", "dot"]);
    let out = stdout(&o);
    assert!(out.starts_with("digraph pts {"));
    assert!(out.contains("r_A(d1)"));
}

#[test]
fn prob_values() {
    let ucp = bundled("ucp.paver");
    let run = |extra: &[&str]| {
        let mut args = vec!["prob", ucp.as_str()];
        args.extend_from_slice(extra);
        stdout(&paver(&args))
    };
    assert_eq!(run(&["--success", "s_C", "--horizon", "round", "--pi", "all=1/2"]), "1/16 (0.0625)\n");
    assert_eq!(run(&["--success", "s_C"]), "1 (1.0)\n");
    assert_eq!(run(&["--success", "nonexistent_label"]), "0 (0.0)\n");
    assert_eq!(run(&["--success", "s_C", "--pi", "all=1/3"]), "1/81 (0.0123456790123)\n");
    assert_eq!(run(&["--success", "s_C", "--pi", "pi2=2/3"]), "2/3 (0.666666666667)\n");
}

#[test]
fn prob_names_nondeterministic_state() {
    let o = paver(&["prob", &bundled("abp.paver"), "--success", "s_C"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("state 1 is nondeterministic"), "{}", stderr(&o));
    let o = paver(&["prob", &bundled("abp.paver"), "--success", "s_C", "--schedule", "uniform", "--horizon", "eventual"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "1 (1.0)\n");
}

#[test]
fn unknown_parameter_is_usage_error() {
    let o = paver(&["prob", &bundled("ucp.paver"), "--success", "s_C", "--pi", "pi9=1/2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = paver(&["prob", &bundled("ucp.paver"), "--success", "s_C", "--pi", "pi1=3/2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn protocol_defaults_equal_bundled_files() {
    let text = stdout(&paver(&["protocol", "ucp"]));
    assert_eq!(text, print_spec(&parse_spec(UCP_PAVER).unwrap()));
    let text = stdout(&paver(&["protocol", "abp", "--delta-size", "1"]));
    assert!(text.contains("comm s_B(bot) | r_B(bot) -> c_B(bot)\n"));
    assert!(text.contains("comm s_D(bot) | r_D(bot) -> c_D(bot)\n"));
    assert_eq!(parse_spec(&text).unwrap(), parse_spec(ABP_PAVER).unwrap());
}

#[test]
fn protocol_round_trips_with_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ucp.paver");
    let o = paver(&["protocol", "ucp", "--pi", "all=1", "--pi", "pi3=2/5", "--delta-size", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    let parsed = parse_spec(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let mut p = UcpParams::uniform(ratio(1, 1), 2);
    p.pi[2] = ratio(2, 5);
    assert_eq!(parsed, build_ucp(&p).unwrap());
}

#[test]
fn simulate_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let args = [
        "simulate",
        &bundled("ucp.paver"),
        "--pi",
        "all=1/2",
        "--success",
        "s_C",
        "--runs",
        "2000",
        "--seed",
        "9",
        "--trace-csv",
        csv.to_str().unwrap(),
    ];
    let one = paver(&args);
    assert_eq!(one.status.code(), Some(0));
    let trace = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(trace.lines().count(), 2001);
    assert!(trace.starts_with("run,outcome,steps\n0,"));
    let two = paver(&args);
    assert_eq!(stdout(&one), stdout(&two));
    assert!(stdout(&one).starts_with("runs: 2000\n"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), trace);
}

#[test]
fn simulate_rejects_zero_runs() {
    let o = paver(&["simulate", &bundled("ucp.paver"), "--success", "s_C", "--runs", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn minimize_ucp_shape() {
    let o = paver(&["minimize", &bundled("ucp.paver"), "--pi", "all=1/2"]);
    let out = stdout(&o);
    let n = out.lines().filter(|l| l.starts_with("state ") && l.contains(" N ")).count();
    let p = out.lines().filter(|l| l.starts_with("state ") && l.contains(" P ")).count();
    assert!(n <= 4 && p <= 4, "{out}");
    let o = paver(&["minimize", &bundled("ucp.paver"), "--mode", "strong"]);
    assert!(stdout(&o).starts_with("pts 3 0\n"));
}

#[test]
fn parse_prints_normal_form() {
    let o = paver(&["parse", &bundled("ucp-spec.paver")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(parse_spec(&stdout(&o)).unwrap(), parse_spec(UCP_SPEC_PAVER).unwrap());
}

#[test]
fn help_on_every_subcommand() {
    for sub in ["parse", "check", "lts", "prob", "protocol", "simulate", "minimize"] {
        let o = paver(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage:"));
    }
    assert_eq!(paver(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_file_is_usage_error() {
    let o = paver(&["lts", "/nonexistent/x.paver"]);
    assert_eq!(o.status.code(), Some(2));
}
