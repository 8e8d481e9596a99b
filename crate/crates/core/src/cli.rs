//! Command-line front end.
//!
//! Every command reads one JSON input document, runs the corresponding
//! library operation and writes a JSON report (or CSV where noted). Exit
//! codes: 0 pass or converged, 1 check failed or not converged, 2 input
//! error, 3 numerical failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coop_sim::{self, AssumptionOptions, EntrainmentOptions, EquilibriumOptions, NonlinearSystem};
use crate::error::Error;
use crate::forms::SystemSource;
use crate::matrix::Matrix;
use crate::ode::{self, Trajectory};
use crate::par::Exec;
use crate::signvar::{self, ClassHint};
use crate::tn::{self, TnClassification};
use crate::tnds::{self, LtvSystem, TndsOptions};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Classify a matrix (TN, TP, oscillatory) by brute-force minors.
    CheckMatrix,
    /// Generate a random TN matrix as a product of bidiagonal factors.
    GenTn,
    /// Verify that a linear time-varying system has TN/TP transition matrices.
    CheckLtv,
    /// Integrate a linear time-varying system.
    Solve,
    /// Count isolated zeros of z_1 and z_n and check s+ monotonicity.
    Zeros,
    /// Period-map convergence of a periodic nonlinear system.
    Entrain,
    /// Convergence to equilibria of a time-invariant nonlinear system.
    Equilibrium,
    /// Sampled certificates for the structural hypotheses.
    Assumptions,
    /// Sign-variation diminishing checks for one matrix and some vectors.
    Svdp,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckMatrix => "check-matrix",
            Command::GenTn => "gen-tn",
            Command::CheckLtv => "check-ltv",
            Command::Solve => "solve",
            Command::Zeros => "zeros",
            Command::Entrain => "entrain",
            Command::Equilibrium => "equilibrium",
            Command::Assumptions => "assumptions",
            Command::Svdp => "svdp",
        }
    }

    /// Tolerance names accepted by `--tol.<name>`.
    pub fn tolerance_names(self) -> &'static [&'static str] {
        match self {
            Command::CheckMatrix => &["minor"],
            Command::GenTn | Command::Solve => &[],
            Command::CheckLtv => &["minor", "structure"],
            Command::Zeros | Command::Svdp => &["zero"],
            Command::Entrain | Command::Equilibrium => &["residual"],
            Command::Assumptions => &["structure", "margin"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "totpos", version, about = "Total positivity and entrainment checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Input JSON document ("-" for stdin).
    #[arg(long, global = true, env = "TOTPOS_INPUT")]
    pub input: Option<PathBuf>,

    /// Report destination (stdout when omitted).
    #[arg(long, global = true, env = "TOTPOS_OUTPUT")]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, env = "TOTPOS_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Integration step.
    #[arg(long, global = true, env = "TOTPOS_STEP")]
    pub step: Option<f64>,

    /// Tolerance override, `--tol.<name> <value>` or `--tol <name>=<value>`.
    #[arg(long = "tol", global = true, env = "TOTPOS_TOL", value_delimiter = ',', value_name = "NAME=VALUE")]
    pub tol: Vec<String>,

    #[arg(long, global = true, env = "TOTPOS_FORMAT", value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[arg(long, global = true, env = "TOTPOS_MAX_PERIODS")]
    pub max_periods: Option<usize>,
}

/// Rewrites `--tol.<name>=<v>` and `--tol.<name> <v>` into `--tol <name>=<v>`.
pub fn normalize_args<I: IntoIterator<Item = String>>(args: I) -> Vec<String> {
    let mut out = Vec::new();
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        match a.strip_prefix("--tol.") {
            Some(rest) => {
                out.push("--tol".to_string());
                if rest.contains('=') {
                    out.push(rest.to_string());
                } else {
                    let value = iter.next().unwrap_or_default();
                    out.push(format!("{rest}={value}"));
                }
            }
            None => out.push(a),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub step: Option<f64>,
    pub format: Format,
    pub max_periods: Option<usize>,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, Error> {
        let mut tolerances = BTreeMap::new();
        for item in &cli.tol {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("tolerance {item:?} is not NAME=VALUE")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("tolerance {name} has non-numeric value {value:?}")))?;
            tolerances.insert(name.trim().to_string(), v);
        }
        let cfg = RunConfig {
            command: cli.command,
            input_path: cli.input,
            output_path: cli.output,
            tolerances,
            seed: cli.seed,
            step: cli.step,
            format: cli.format,
            max_periods: cli.max_periods,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let known = self.command.tolerance_names();
        for (name, v) in &self.tolerances {
            if !known.contains(&name.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown tolerance {name:?} for {}; accepted: [{}]",
                    self.command.name(),
                    known.join(", ")
                )));
            }
            if !(*v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("tolerance {name} must be positive")));
            }
        }
        if let Some(h) = self.step {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::invalid("step must be positive"));
            }
        }
        let csv_ok = matches!(self.command, Command::Solve | Command::Entrain);
        if self.format == Format::Csv && !csv_ok {
            return Err(Error::invalid(format!(
                "{} has no CSV output; use --format json",
                self.command.name()
            )));
        }
        Ok(())
    }

    fn tol(&self, name: &str) -> Option<f64> {
        self.tolerances.get(name).copied()
    }
}

/// Result of [`run`]: exit code and the report text to emit.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: String,
}

pub fn error_exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

pub fn error_report(e: &Error) -> String {
    let v = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
    format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
}

pub fn run(cfg: &RunConfig) -> Outcome {
    match execute(cfg) {
        Ok(o) => o,
        Err(e) => Outcome {
            exit_code: error_exit_code(&e),
            report: error_report(&e),
        },
    }
}

/// Entry point shared by the binary: parses `args`, runs and writes the
/// report; returns the process exit code.
pub fn main_with_args<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(normalize_args(args)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => {
            print!("{}", error_report(&e));
            return EXIT_INPUT;
        }
    };
    let outcome = run(&cfg);
    let written = match &cfg.output_path {
        Some(p) => fs::write(p, &outcome.report),
        None => io::stdout().write_all(outcome.report.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("failed to write report: {e}");
        return EXIT_INPUT;
    }
    outcome.exit_code
}

fn read_input<T: DeserializeOwned>(cfg: &RunConfig) -> Result<T, Error> {
    let text = match cfg.input_path.as_deref() {
        None => {
            return Err(Error::invalid(format!(
                "{} needs --input",
                cfg.command.name()
            )))
        }
        Some(p) if p.as_os_str() == "-" => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Error::invalid(format!("reading stdin: {e}")))?;
            s
        }
        Some(p) => fs::read_to_string(p).map_err(|e| Error::invalid(format!("reading {}: {e}", p.display())))?,
    };
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("input does not match the {} schema: {e}", cfg.command.name())))
}

fn report(cfg: &RunConfig, effective_tol: BTreeMap<String, f64>, passed: bool, result: Value) -> Outcome {
    let mut config = serde_json::to_value(cfg).expect("config serializes");
    config["tolerances"] = serde_json::to_value(effective_tol).expect("map serializes");
    let v = json!({
        "command": cfg.command.name(),
        "config": config,
        "passed": passed,
        "result": result,
    });
    Outcome {
        exit_code: if passed { EXIT_PASS } else { EXIT_FAIL },
        report: format!("{}\n", serde_json::to_string_pretty(&v).expect("json")),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn tols(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenTnInput {
    n: usize,
    #[serde(default = "default_factors")]
    factors: usize,
}

fn default_factors() -> usize {
    12
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LtvInput {
    system: LtvSystem,
    #[serde(default)]
    times: Option<Vec<f64>>,
    #[serde(default)]
    structure_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveInput {
    system: LtvSystem,
    z0: Vec<f64>,
    #[serde(default)]
    t0: f64,
    t_end: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NonlinearInput {
    system: SystemSource,
    #[serde(default)]
    initial_states: Option<Vec<Vec<f64>>>,
    /// Number of seeded uniform samples from the box when
    /// `initial_states` is absent.
    #[serde(default)]
    random_states: Option<usize>,
    #[serde(default)]
    t_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssumptionInput {
    system: SystemSource,
    #[serde(default)]
    options: Option<AssumptionOptions>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvdpInput {
    matrix: Matrix,
    vectors: Vec<Vec<f64>>,
    class_hint: ClassHint,
}

/// Default sample times for `check-ltv`: 20 interior points of a bounded
/// interval, otherwise `{0, 0.05, ..., 1}`.
fn default_ltv_times(sys: &LtvSystem) -> Vec<f64> {
    let (a, b) = sys.interval();
    if a.is_finite() && b.is_finite() {
        (1..=20).map(|k| a + (b - a) * k as f64 / 21.0).collect()
    } else {
        (0..=20).map(|k| k as f64 * 0.05).collect()
    }
}

fn build_system(src: &SystemSource) -> Result<NonlinearSystem, Error> {
    NonlinearSystem::from_spec(&src.resolve()?)
}

fn initial_states(sys: &NonlinearSystem, input: &NonlinearInput, seed: u64) -> Vec<Vec<f64>> {
    match &input.initial_states {
        Some(v) => v.clone(),
        None => sys.random_states(input.random_states.unwrap_or(20), seed),
    }
}

fn execute(cfg: &RunConfig) -> Result<Outcome, Error> {
    cfg.validate()?;
    let exec = Exec::default();
    match cfg.command {
        Command::CheckMatrix => {
            let m: Matrix = read_input(cfg)?;
            let tol = cfg.tol("minor").unwrap_or_else(|| tn::default_tol(&m));
            let c: TnClassification = tn::classify_with(&m, tol, exec)?;
            Ok(report(cfg, tols(&[("minor", tol)]), c.is_tn, to_value(&c)))
        }
        Command::GenTn => {
            let input: GenTnInput = read_input(cfg)?;
            let m = tn::random_tn(input.n, input.factors, cfg.seed)?;
            let result = json!({"n": input.n, "factors": input.factors, "seed": cfg.seed, "matrix": m});
            Ok(report(cfg, BTreeMap::new(), true, result))
        }
        Command::CheckLtv => {
            let input: LtvInput = read_input(cfg)?;
            let times = input.times.clone().unwrap_or_else(|| default_ltv_times(&input.system));
            let mut opts = TndsOptions {
                minor_tol: cfg.tol("minor"),
                step: cfg.step,
                ..Default::default()
            };
            if let Some(s) = cfg.tol("structure") {
                opts.structure.tol = s;
            }
            if let Some(p) = input.structure_points {
                opts.structure_points = p;
            }
            let pairs = tnds::pair_grid(&times);
            let r = tnds::verify_tnds_with(&input.system, &pairs, opts, exec)?;
            let class = match (r.all_tn, r.all_tp) {
                (true, Some(true)) => "TPDS",
                (true, _) => "TNDS",
                _ => "none",
            };
            let mut result = json!({
                "class": class,
                "tpds": r.all_tp == Some(true),
                "times": times,
                "options": opts,
            });
            result["report"] = to_value(&r);
            let mut t = tols(&[("structure", opts.structure.tol)]);
            if let Some(m) = opts.minor_tol {
                t.insert("minor".into(), m);
            }
            Ok(report(cfg, t, r.all_tn, result))
        }
        Command::Solve => {
            let input: SolveInput = read_input(cfg)?;
            let step = cfg.step.unwrap_or_else(|| ode::default_step(input.t_end - input.t0));
            let traj = tnds::solve_z(&input.system, input.t0, &input.z0, input.t_end, step)?;
            if cfg.format == Format::Csv {
                return Ok(Outcome {
                    exit_code: EXIT_PASS,
                    report: trajectory_csv(&traj, "z"),
                });
            }
            Ok(report(cfg, BTreeMap::new(), true, to_value(&traj)))
        }
        Command::Zeros => {
            let input: SolveInput = read_input(cfg)?;
            let zero_tol = cfg.tol("zero").unwrap_or(signvar::DEFAULT_ZERO_TOL);
            let step = cfg.step.unwrap_or_else(|| ode::default_step(input.t_end - input.t0));
            let traj = tnds::solve_z(&input.system, input.t0, &input.z0, input.t_end, step)?;
            let n = traj.dim();
            let first = tnds::count_isolated_zeros(&traj, 0, zero_tol, 10.0 * step)?;
            let last = tnds::count_isolated_zeros(&traj, n - 1, zero_tol, 10.0 * step)?;
            let splus = tnds::splus_monotone(&traj, zero_tol)?;
            let bound = n - 1;
            let bound_holds = first.count <= bound && last.count <= bound;
            let passed = bound_holds && splus.passed;
            let result = json!({
                "step": step,
                "bound": bound,
                "bound_holds": bound_holds,
                "z_first": first,
                "z_last": last,
                "s_plus": {
                    "non_increasing": splus.non_increasing,
                    "first_increase": splus.first_increase,
                    "drops": splus.drops,
                    "passed": splus.passed,
                },
            });
            Ok(report(cfg, tols(&[("zero", zero_tol)]), passed, result))
        }
        Command::Entrain => {
            let input: NonlinearInput = read_input(cfg)?;
            let sys = build_system(&input.system)?;
            let mut opts = EntrainmentOptions::default();
            if let Some(r) = cfg.tol("residual") {
                opts.tol = r;
            }
            if let Some(h) = cfg.step {
                opts.step = h;
            }
            if let Some(p) = cfg.max_periods {
                opts.max_periods = p;
            }
            let x0s = initial_states(&sys, &input, cfg.seed);
            let runs = coop_sim::entrainment_sweep(&sys, &x0s, &opts, exec)
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let passed = runs.iter().all(|r| r.converged && r.periodic_verified);
            if cfg.format == Format::Csv {
                let mut out = String::from("run,k");
                for i in 1..=sys.n() {
                    out.push_str(&format!(",x{i}"));
                }
                out.push('\n');
                for (run, r) in runs.iter().enumerate() {
                    for (k, x) in r.poincare_iterates.iter().enumerate() {
                        out.push_str(&format!("{run},{k}"));
                        for v in x {
                            out.push(',');
                            out.push_str(&ode::fmt_sig17(*v));
                        }
                        out.push('\n');
                    }
                }
                return Ok(Outcome {
                    exit_code: if passed { EXIT_PASS } else { EXIT_FAIL },
                    report: out,
                });
            }
            let result = json!({
                "system": sys.name(),
                "all_converged": runs.iter().all(|r| r.converged),
                "all_certified": runs.iter().all(|r| r.certified),
                "runs": runs,
            });
            Ok(report(cfg, tols(&[("residual", opts.tol)]), passed, result))
        }
        Command::Equilibrium => {
            let input: NonlinearInput = read_input(cfg)?;
            let sys = build_system(&input.system)?;
            let mut opts = EquilibriumOptions::default();
            if let Some(r) = cfg.tol("residual") {
                opts.tol = r;
            }
            if let Some(h) = cfg.step {
                opts.step = h;
            }
            if let Some(t) = input.t_max {
                opts.t_max = t;
            }
            let x0s = initial_states(&sys, &input, cfg.seed);
            let runs = coop_sim::equilibrium_sweep(&sys, &x0s, &opts, exec)
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let passed = runs.iter().all(|r| r.converged && r.stationary);
            let result = json!({
                "system": sys.name(),
                "all_converged": runs.iter().all(|r| r.converged),
                "all_certified": runs.iter().all(|r| r.certified),
                "runs": runs,
            });
            Ok(report(cfg, tols(&[("residual", opts.tol)]), passed, result))
        }
        Command::Assumptions => {
            let input: AssumptionInput = read_input(cfg)?;
            let sys = build_system(&input.system)?;
            let mut opts = input.options.unwrap_or_default();
            opts.seed = cfg.seed;
            if let Some(s) = cfg.tol("structure") {
                opts.tol = s;
            }
            if let Some(m) = cfg.tol("margin") {
                opts.margin = m;
            }
            let r = coop_sim::check_assumptions(&sys, &opts, exec);
            let mut result = to_value(&r);
            result["options"] = to_value(&opts);
            let t = tols(&[("structure", opts.tol), ("margin", opts.margin)]);
            Ok(report(cfg, t, r.certified, result))
        }
        Command::Svdp => {
            let input: SvdpInput = read_input(cfg)?;
            let zero_tol = cfg.tol("zero").unwrap_or(signvar::DEFAULT_ZERO_TOL);
            let reports = input
                .vectors
                .iter()
                .map(|x| signvar::svdp_check(&input.matrix, x, input.class_hint, zero_tol))
                .collect::<Result<Vec<_>, _>>()?;
            let passed = reports.iter().all(|r| r.passed);
            Ok(report(cfg, tols(&[("zero", zero_tol)]), passed, json!({"checks": reports})))
        }
    }
}

fn trajectory_csv(traj: &Trajectory, prefix: &str) -> String {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, prefix).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tol_flags_are_normalized() {
        let args = ["totpos", "check-matrix", "--tol.minor", "1e-9", "--tol.zero=2"]
            .map(String::from);
        assert_eq!(
            normalize_args(args),
            ["totpos", "check-matrix", "--tol", "minor=1e-9", "--tol", "zero=2"]
        );
    }

    fn cfg(command: Command, tolerances: &[(&str, f64)]) -> RunConfig {
        RunConfig {
            command,
            input_path: None,
            output_path: None,
            tolerances: tols(tolerances),
            seed: 0,
            step: None,
            format: Format::Json,
            max_periods: None,
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(Command::CheckMatrix, &[("minor", 1e-9)]).validate().is_ok());
        assert!(cfg(Command::CheckMatrix, &[("zero", 1e-9)]).validate().is_err());
        assert!(cfg(Command::CheckMatrix, &[("minor", -1.0)]).validate().is_err());
        let mut c = cfg(Command::Svdp, &[]);
        c.format = Format::Csv;
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_input_is_input_error() {
        let o = run(&cfg(Command::CheckMatrix, &[]));
        assert_eq!(o.exit_code, EXIT_INPUT);
        let v: Value = serde_json::from_str(&o.report).unwrap();
        assert_eq!(v["error"]["kind"], "invalid_input");
    }
}
