//! End-to-end tests of the `primperc` binary: exit codes, output schemas,
//! and bit-for-bit reproducibility across worker counts.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_primperc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn temp_path(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("primperc-cli-{tag}-{}", std::process::id()))
}

#[test]
fn sublinear_output_is_identical_across_thread_counts() {
    let args = [
        "simulate", "--regime", "sublinear", "--n", "240", "--theta", "0.5", "--trials", "12",
        "--seed", "5",
    ];
    let one = bin().args(args).env("PRIMPERC_THREADS", "1").output().unwrap();
    let four = bin().args(args).env("PRIMPERC_THREADS", "4").output().unwrap();
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    assert!(four.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert!(stdout(&one).starts_with("theta,n,regime,k_or_s,trials,mean,std,"));
}

#[test]
fn linear_rows_cover_every_fraction() {
    let out = run(&[
        "simulate", "--regime", "linear", "--s", "0.3,0.6", "--nb", "60", "--nw", "60",
        "--trials", "8", "--seed", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().contains(",linear,0.3,"));
    assert!(text.lines().nth(2).unwrap().contains(",linear,0.6,"));
}

#[test]
fn curve_emits_documented_schema() {
    let out = run(&["curve", "--theta", "0.3", "--points", "8"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("s,lambda,rho\n"));
    assert_eq!(text.lines().count(), 9);

    let json = run(&["curve", "--theta", "0.3", "--points", "8", "--format", "json"]);
    assert!(json.status.success());
    let value: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(value["points"].as_array().unwrap().len(), 8);
}

#[test]
fn verify_passes_clean_and_catches_injected_corruption() {
    let clean = run(&[
        "verify", "--max-n", "2", "--seeds", "3", "--identity-n", "30", "--identity-seeds", "2",
    ]);
    assert!(clean.status.success(), "{}", String::from_utf8_lossy(&clean.stderr));
    assert!(stdout(&clean).contains("verified"));

    let corrupted = run(&[
        "verify", "--max-n", "2", "--seeds", "3", "--identity-n", "30", "--identity-seeds", "2",
        "--inject-corruption",
    ]);
    assert_eq!(corrupted.status.code(), Some(1));
    assert!(stdout(&corrupted).contains("FAIL interval_representation"));
}

#[test]
fn verify_dumps_a_bookkeeping_trace() {
    let path = temp_path("trace.csv");
    let out = run(&[
        "verify", "--max-n", "1", "--seeds", "1", "--identity-n", "40", "--identity-seeds", "1",
        "--dump-trace", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.starts_with("k,tau_b,o_w,o_b,k_w,k_b,s_w,s_b,a_w,a_b,r,j_w,i_b\n"));
    assert_eq!(text.lines().count(), 21); // header + one row per black vertex
}

#[test]
fn invalid_arguments_exit_two() {
    for args in [
        vec!["simulate", "--regime", "linear", "--s", "1.5", "--n", "100", "--theta", "0.5"],
        vec!["simulate", "--regime", "sublinear", "--n", "100"], // missing --theta
        vec!["simulate", "--regime", "sublinear", "--n", "100", "--theta", "0.5", "--policy", "north"],
        vec!["verify", "--max-n", "0"],
        vec!["curve", "--theta", "1.5"],
        vec!["bp", "--theta", "0.5", "--lambda", "-1"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
    }
    let bad_threads = bin()
        .args(["curve", "--theta", "0.5", "--points", "2"])
        .env("PRIMPERC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
}

#[test]
fn exceeded_tolerance_exits_one() {
    let out = run(&[
        "bp", "--theta", "0.5", "--lambda", "2", "--trials", "400", "--max-generations", "40",
        "--seed", "1", "--tol", "1e-9",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("violation"));
}

#[test]
fn dual_sweep_passes() {
    let out = run(&["dual", "--nb", "4", "--nw", "6", "--seeds", "10"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("0 mismatch(es)"));
}

#[test]
fn config_file_drives_an_experiment() {
    let path = temp_path("config.json");
    std::fs::write(
        &path,
        r#"{
            "targets": [{"n": 120, "theta": 0.5}],
            "regime": {"sublinear": {"kappa": "sqrt"}},
            "trials": 6,
            "seed": 9
        }"#,
    )
    .unwrap();
    let out = run(&["simulate", "--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    // sqrt(120) floors to 10.
    assert!(text.lines().nth(1).unwrap().contains(",sublinear,10,6,"));

    let conflict = run(&["simulate", "--config", "/nonexistent.json", "--trials", "3"]);
    assert_eq!(conflict.status.code(), Some(2));
}

#[test]
fn output_lands_in_requested_file() {
    let path = temp_path("rows.csv");
    let out = run(&[
        "simulate", "--regime", "sublinear", "--n", "80", "--theta", "0.5", "--trials", "4",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.starts_with("theta,n,regime,"));
}
