use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_totpos");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn totpos(args: &[&str]) -> Command {
    let mut c = Command::new(BIN);
    c.args(args);
    for var in [
        "TOTPOS_INPUT",
        "TOTPOS_OUTPUT",
        "TOTPOS_SEED",
        "TOTPOS_STEP",
        "TOTPOS_TOL",
        "TOTPOS_FORMAT",
        "TOTPOS_MAX_PERIODS",
    ] {
        c.env_remove(var);
    }
    c
}

fn run_on(cmd: &str, input: &str, extra: &[&str]) -> Output {
    let path = data(input);
    let mut args = vec![cmd, "--input", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    totpos(&args).output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn temp_path(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("totpos-cli-{}-{tag}", std::process::id()))
}

#[test]
fn check_matrix_oscillatory() {
    let out = run_on("check-matrix", "eps_matrix.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["result"]["is_tn"], true);
    assert_eq!(r["result"]["is_oscillatory"], true);
    assert_eq!(r["result"]["power_is_tp"], true);
}

#[test]
fn check_ltv_triangular_is_tnds() {
    let out = run_on("check-ltv", "triangular_ltv.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["result"]["class"], "TNDS");
    assert_eq!(r["result"]["tpds"], false);
}

#[test]
fn entrain_with_one_period_does_not_converge() {
    let out = run_on("entrain", "d3_entrain.json", &["--max-periods", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["passed"], false);
    assert_eq!(r["config"]["max_periods"], 1);
}

#[test]
fn other_commands_exit_codes() {
    assert_eq!(run_on("zeros", "triangular_solve.json", &[]).status.code(), Some(0));
    assert_eq!(run_on("svdp", "svdp_eps_square.json", &[]).status.code(), Some(0));
    assert_eq!(run_on("gen-tn", "gen_tn.json", &[]).status.code(), Some(0));
    assert_eq!(run_on("assumptions", "d3_assumptions.json", &[]).status.code(), Some(0));
    assert_eq!(run_on("assumptions", "d3_coupled_assumptions.json", &[]).status.code(), Some(1));
}

#[test]
fn input_errors_exit_2_with_json() {
    let cases: Vec<Output> = vec![
        run_on("check-matrix", "eps_matrix.json", &["--tol.bogus", "1e-3"]),
        run_on("check-matrix", "eps_matrix.json", &["--tol.minor", "-1"]),
        run_on("check-matrix", "eps_matrix.json", &["--format", "csv"]),
        run_on("check-matrix", "d3_entrain.json", &[]),
        totpos(&["check-matrix", "--input", "/nonexistent/totpos.json"]).output().unwrap(),
    ];
    for out in cases {
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
        let r = report(&out);
        assert!(r["error"]["kind"].is_string());
        assert!(r["error"]["message"].is_string());
    }
}

#[test]
fn invariance_violation_exits_3() {
    let input = temp_path("cubic.json");
    std::fs::write(
        &input,
        r#"{"system":{"builtin":"cubic_1d","overrides":{"omega":{"lo":[0.5],"hi":[0.9]}}},"initial_states":[[0.8]]}"#,
    )
    .unwrap();
    let out = totpos(&["entrain", "--input", input.to_str().unwrap()]).output().unwrap();
    std::fs::remove_file(&input).ok();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out)["error"]["kind"], "invariance_violation");
}

#[test]
fn reports_are_deterministic() {
    let path = temp_path("det.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let out = run_on("gen-tn", "gen_tn.json", &["--seed", "17", "--output", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        runs.push(std::fs::read(&path).unwrap());
    }
    std::fs::remove_file(&path).ok();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn environment_overrides_flags_defaults() {
    let flag = report(&run_on("gen-tn", "gen_tn.json", &["--seed", "5"]));
    let mut cmd = totpos(&["gen-tn", "--input", data("gen_tn.json").to_str().unwrap()]);
    let env = report(&cmd.env("TOTPOS_SEED", "5").output().unwrap());
    let default = report(&run_on("gen-tn", "gen_tn.json", &[]));
    assert_eq!(env["config"]["seed"], 5);
    assert_eq!(flag, env);
    assert_ne!(env["result"], default["result"]);

    let mut cmd = totpos(&["check-matrix", "--input", data("eps_matrix.json").to_str().unwrap()]);
    let tol = report(&cmd.env("TOTPOS_TOL", "minor=1e-6").output().unwrap());
    assert_eq!(tol["config"]["tolerances"]["minor"], 1e-6);
}

#[test]
fn csv_trajectory_export() {
    let out = run_on("solve", "triangular_solve.json", &["--format", "csv", "--step", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.split('\n').collect();
    assert_eq!(lines[0], "t,z1,z2");
    assert_eq!(lines.last(), Some(&""));
    assert!(!text.contains('\r'));
    let row: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 1.0);
    assert!((row[2] - (1.0 - 3.0)).abs() < 1e-12);
    assert_eq!(lines.len(), 15);
    for field in lines[1].split(',') {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{field}");
    }
}
