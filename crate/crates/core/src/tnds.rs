//! Linear time-varying systems `z' = A(t) z`.
//!
//! Covers the structural test for totally nonnegative / totally positive
//! differential systems (tridiagonal `A(t)` with nonnegative off-diagonal
//! bands), RK4 transition matrices, sampled TN/TP verification of those
//! transition matrices, and zero counting along solutions.
//!
//! Verification is always sampled: a failed pair is a certificate, a clean
//! report is evidence over the listed pairs only. Coefficients are restricted
//! to continuous or piecewise-constant representatives.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ode::{self, default_step, Trajectory};
use crate::par::Exec;
use crate::signvar;
use crate::tn::{self, MinorWitness};

/// Coefficient representation of `A(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Coefficients {
    Constant {
        a: Matrix,
    },
    /// `A(t) = base + sin(2 pi t / period + phase) * amplitude`.
    PeriodicSine {
        base: Matrix,
        amplitude: Matrix,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise constant: `matrices[k]` on `[times[k], times[k+1])`, the
    /// first matrix before `times[0]` and the last one after the final
    /// breakpoint.
    Sampled {
        times: Vec<f64>,
        matrices: Vec<Matrix>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtvSystem {
    n: usize,
    interval: (f64, f64),
    coefficients: Coefficients,
}

impl LtvSystem {
    pub fn new(coefficients: Coefficients) -> Result<Self> {
        Self::on_interval(coefficients, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn constant(a: Matrix) -> Self {
        Self::new(Coefficients::Constant { a }).expect("constant system is always valid")
    }

    pub fn on_interval(coefficients: Coefficients, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::invalid(format!("interval ({a}, {b}) is empty")));
        }
        let n = match &coefficients {
            Coefficients::Constant { a } => a.n(),
            Coefficients::PeriodicSine {
                base,
                amplitude,
                period,
                phase,
            } => {
                if base.n() != amplitude.n() {
                    return Err(Error::invalid("base and amplitude dimensions differ"));
                }
                if !(*period > 0.0) || !period.is_finite() || !phase.is_finite() {
                    return Err(Error::invalid("period must be positive and finite"));
                }
                base.n()
            }
            Coefficients::Sampled { times, matrices } => {
                if times.is_empty() || times.len() != matrices.len() {
                    return Err(Error::invalid(
                        "sampled system needs one matrix per breakpoint",
                    ));
                }
                if !times.windows(2).all(|w| w[0] < w[1]) || times.iter().any(|t| !t.is_finite()) {
                    return Err(Error::invalid("breakpoints must be finite and increasing"));
                }
                let n = matrices[0].n();
                if matrices.iter().any(|m| m.n() != n) {
                    return Err(Error::invalid("sampled matrices differ in dimension"));
                }
                n
            }
        };
        Ok(LtvSystem {
            n,
            interval: (a, b),
            coefficients,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn eval(&self, t: f64) -> Matrix {
        match &self.coefficients {
            Coefficients::Constant { a } => a.clone(),
            Coefficients::PeriodicSine {
                base,
                amplitude,
                period,
                phase,
            } => {
                let mut m = base.clone();
                m.axpy(
                    (2.0 * std::f64::consts::PI * t / period + phase).sin(),
                    amplitude,
                );
                m
            }
            Coefficients::Sampled { times, matrices } => {
                let k = times.partition_point(|&s| s <= t);
                matrices[k.saturating_sub(1)].clone()
            }
        }
    }

    /// `dz = A(t) z`.
    pub fn rhs(&self, t: f64, z: &[f64], dz: &mut [f64]) {
        let a = self.eval(t);
        for (i, d) in dz.iter_mut().enumerate() {
            *d = a.row(i).iter().zip(z).map(|(x, y)| x * y).sum();
        }
    }

    fn check_times(&self, t0: f64, t: f64) -> Result<()> {
        let (a, b) = self.interval;
        if !(t0 > a && t < b) || !t0.is_finite() || !t.is_finite() {
            return Err(Error::invalid(format!(
                "times ({t0}, {t}) must lie inside the open interval ({a}, {b})"
            )));
        }
        if t < t0 {
            return Err(Error::invalid(format!(
                "backward transition from {t0} to {t} is not supported"
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LtvRepr {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interval: Option<[Option<f64>; 2]>,
    kind: String,
    params: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    a: Matrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SineParams {
    base: Matrix,
    amplitude: Matrix,
    period: f64,
    #[serde(default)]
    phase: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampledParams {
    times: Vec<f64>,
    matrices: Vec<Matrix>,
}

impl Serialize for LtvSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let tagged = serde_json::to_value(&self.coefficients).map_err(serde::ser::Error::custom)?;
        let (a, b) = self.interval;
        LtvRepr {
            n: self.n,
            interval: (a.is_finite() || b.is_finite()).then_some([a.is_finite().then_some(a), b.is_finite().then_some(b)]),
            kind: tagged["kind"].as_str().unwrap_or_default().to_string(),
            params: tagged["params"].clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LtvSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = LtvRepr::deserialize(d)?;
        let coefficients = match repr.kind.as_str() {
            "constant" => {
                let p: ConstantParams = serde_json::from_value(repr.params).map_err(D::Error::custom)?;
                Coefficients::Constant { a: p.a }
            }
            "periodic_sine" => {
                let p: SineParams = serde_json::from_value(repr.params).map_err(D::Error::custom)?;
                Coefficients::PeriodicSine {
                    base: p.base,
                    amplitude: p.amplitude,
                    period: p.period,
                    phase: p.phase,
                }
            }
            "sampled" => {
                let p: SampledParams = serde_json::from_value(repr.params).map_err(D::Error::custom)?;
                Coefficients::Sampled {
                    times: p.times,
                    matrices: p.matrices,
                }
            }
            other => {
                return Err(D::Error::custom(format!(
                    "unknown system kind {other:?} (expected constant, periodic_sine or sampled)"
                )))
            }
        };
        let [a, b] = repr.interval.unwrap_or([None, None]);
        let (a, b) = (a.unwrap_or(f64::NEG_INFINITY), b.unwrap_or(f64::INFINITY));
        let sys = LtvSystem::on_interval(coefficients, a, b).map_err(D::Error::custom)?;
        if sys.n != repr.n {
            return Err(D::Error::custom(format!(
                "declared n = {} but coefficients have dimension {}",
                repr.n, sys.n
            )));
        }
        Ok(sys)
    }
}

/// Membership of a single matrix in the class of tridiagonal matrices with
/// off-diagonal bands `>= -tol`. Returns the worst offending entry.
pub fn band_violation(a: &Matrix, tol: f64) -> Option<EntryViolation> {
    let n = a.n();
    let mut worst: Option<EntryViolation> = None;
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            let excess = match i.abs_diff(j) {
                0 => continue,
                1 => -v - tol,
                _ => v.abs() - tol,
            };
            if excess > 0.0 && worst.as_ref().is_none_or(|w| excess > w.excess) {
                worst = Some(EntryViolation {
                    row: i,
                    col: j,
                    value: v,
                    excess,
                });
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryViolation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    /// Amount by which the entry misses the constraint.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureViolation {
    pub t: f64,
    #[serde(flatten)]
    pub entry: EntryViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroBand {
    pub row: usize,
    pub col: usize,
    /// Length of the longest run of consecutive grid points at which the
    /// entry is `<= tol`.
    pub run: usize,
    pub t_start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureVerdict {
    pub in_m_everywhere: bool,
    pub tpds_candidate: bool,
    pub violation: Option<StructureViolation>,
    /// Off-diagonal entry whose zero run disqualified the TPDS candidate.
    pub zero_band: Option<ZeroBand>,
    pub grid_points: usize,
    pub run_threshold: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureOptions {
    pub tol: f64,
    /// Fraction of the grid that a zero run must cover to rule out TPDS.
    pub interval_frac: f64,
}

impl Default for StructureOptions {
    fn default() -> Self {
        StructureOptions {
            tol: 1e-9,
            interval_frac: 0.05,
        }
    }
}

/// Sampled structural classification of `A(t)` over `grid`.
pub fn structure_class(sys: &LtvSystem, grid: &[f64], opts: StructureOptions) -> Result<StructureVerdict> {
    if grid.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    let (a, b) = sys.interval;
    if let Some(t) = grid.iter().find(|&&t| !(t > a && t < b)) {
        return Err(Error::invalid(format!(
            "grid time {t} lies outside ({a}, {b})"
        )));
    }
    let n = sys.n;
    let threshold = ((opts.interval_frac * grid.len() as f64).ceil() as usize).max(1);
    let mut violation: Option<StructureViolation> = None;
    // Off-diagonal band positions: superdiagonal then subdiagonal.
    let bands: Vec<(usize, usize)> = (0..n.saturating_sub(1))
        .map(|i| (i, i + 1))
        .chain((0..n.saturating_sub(1)).map(|i| (i + 1, i)))
        .collect();
    let mut run = vec![0usize; bands.len()];
    let mut run_start = vec![0.0; bands.len()];
    let mut best: Vec<(usize, f64)> = vec![(0, 0.0); bands.len()];

    for &t in grid {
        let m = sys.eval(t);
        if let Some(v) = band_violation(&m, opts.tol) {
            if violation.as_ref().is_none_or(|w| v.excess > w.entry.excess) {
                violation = Some(StructureViolation { t, entry: v });
            }
        }
        for (k, &(i, j)) in bands.iter().enumerate() {
            if m[(i, j)] <= opts.tol {
                if run[k] == 0 {
                    run_start[k] = t;
                }
                run[k] += 1;
                if run[k] > best[k].0 {
                    best[k] = (run[k], run_start[k]);
                }
            } else {
                run[k] = 0;
            }
        }
    }
    let in_m = violation.is_none();
    let zero_band = bands
        .iter()
        .zip(&best)
        .filter(|(_, (r, _))| *r >= threshold)
        .max_by_key(|(_, (r, _))| *r)
        .map(|(&(row, col), &(run, t_start))| ZeroBand {
            row,
            col,
            run,
            t_start,
        });
    Ok(StructureVerdict {
        in_m_everywhere: in_m,
        tpds_candidate: in_m && zero_band.is_none(),
        violation,
        zero_band,
        grid_points: grid.len(),
        run_threshold: threshold,
    })
}

/// Transition matrix `Phi(t, t0)` of `Phi' = A Phi`, `Phi(t0) = I`, by
/// fixed-step RK4. The last step is shortened to end exactly at `t`.
pub fn transition_matrix(sys: &LtvSystem, t0: f64, t: f64, step: f64) -> Result<Matrix> {
    sys.check_times(t0, t)?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("step must be positive and finite"));
    }
    let n = sys.n;
    let grid = ode::time_grid(t0, t, step);
    let mut phi = Matrix::identity(n);
    for w in grid.windows(2) {
        let (s, h) = (w[0], w[1] - w[0]);
        let a0 = sys.eval(s);
        let am = sys.eval(s + 0.5 * h);
        let a1 = sys.eval(s + h);
        let k1 = &a0 * &phi;
        let mut y = phi.clone();
        y.axpy(0.5 * h, &k1);
        let k2 = &am * &y;
        let mut y = phi.clone();
        y.axpy(0.5 * h, &k2);
        let k3 = &am * &y;
        let mut y = phi.clone();
        y.axpy(h, &k3);
        let k4 = &a1 * &y;
        phi.axpy(h / 6.0, &k1);
        phi.axpy(h / 3.0, &k2);
        phi.axpy(h / 3.0, &k3);
        phi.axpy(h / 6.0, &k4);
        if !phi.is_finite() {
            return Err(Error::Diverged { last_valid_time: s });
        }
    }
    Ok(phi)
}

/// All pairs `(t0, t)` with `t0 <= t` drawn from `times`.
pub fn pair_grid(times: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs = Vec::new();
    for (i, &t0) in times.iter().enumerate() {
        for &t in &times[i..] {
            if t >= t0 {
                pairs.push((t0, t));
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TndsOptions {
    /// Absolute minor tolerance; `None` uses [`tn::default_tol`] of each
    /// transition matrix.
    pub minor_tol: Option<f64>,
    /// RK4 step; `None` uses [`default_step`] of each pair's span.
    pub step: Option<f64>,
    pub structure: StructureOptions,
    /// Grid points for the structural check spanning the sampled pairs.
    pub structure_points: usize,
}

impl Default for TndsOptions {
    fn default() -> Self {
        TndsOptions {
            minor_tol: None,
            step: None,
            structure: StructureOptions::default(),
            structure_points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub t0: f64,
    pub t: f64,
    pub is_tn: bool,
    /// Only evaluated for TPDS candidates with `t0 < t`.
    pub is_tp: Option<bool>,
    pub min_minor: f64,
    pub witness: Option<MinorWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TndsReport {
    pub structure: StructureVerdict,
    pub pairs: Vec<PairOutcome>,
    pub all_tn: bool,
    /// `None` when the system is not a TPDS candidate.
    pub all_tp: Option<bool>,
    pub tp_pairs_checked: usize,
    /// Smallest minor over the TP-checked pairs.
    pub min_tp_minor: Option<f64>,
    pub tn_failures: usize,
    pub tp_failures: usize,
    pub note: String,
}

pub fn verify_tnds(sys: &LtvSystem, pairs: &[(f64, f64)], opts: TndsOptions) -> Result<TndsReport> {
    verify_tnds_with(sys, pairs, opts, Exec::default())
}

/// Classifies `Phi(t, t0)` for each sampled pair.
pub fn verify_tnds_with(
    sys: &LtvSystem,
    pairs: &[(f64, f64)],
    opts: TndsOptions,
    exec: Exec,
) -> Result<TndsReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("no time pairs to verify"));
    }
    if sys.n > tn::BRUTE_FORCE_CAP {
        return Err(Error::Capacity {
            n: sys.n,
            cap: tn::BRUTE_FORCE_CAP,
        });
    }
    for &(t0, t) in pairs {
        sys.check_times(t0, t)?;
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let points = opts.structure_points.max(2);
    let grid: Vec<f64> = if hi > lo {
        (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect()
    } else {
        vec![lo]
    };
    let structure = structure_class(sys, &grid, opts.structure)?;
    let tpds = structure.tpds_candidate;

    let outcomes = exec.map_slice(pairs, |&(t0, t)| -> Result<PairOutcome> {
        let step = opts.step.unwrap_or_else(|| default_step(t - t0));
        let phi = transition_matrix(sys, t0, t, step)?;
        let tol = opts.minor_tol.unwrap_or_else(|| tn::default_tol(&phi));
        let c = tn::classify(&phi, tol)?;
        Ok(PairOutcome {
            t0,
            t,
            is_tn: c.is_tn,
            is_tp: (tpds && t0 < t).then_some(c.is_tp),
            min_minor: c.min_minor,
            witness: c.witness,
        })
    });
    let pairs: Vec<PairOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let tn_failures = pairs.iter().filter(|p| !p.is_tn).count();
    let tp_checked: Vec<&PairOutcome> = pairs.iter().filter(|p| p.is_tp.is_some()).collect();
    let tp_failures = tp_checked.iter().filter(|p| p.is_tp == Some(false)).count();
    let min_tp_minor = tp_checked
        .iter()
        .map(|p| p.min_minor)
        .reduce(f64::min);
    Ok(TndsReport {
        all_tn: tn_failures == 0,
        all_tp: tpds.then_some(tp_failures == 0),
        tp_pairs_checked: tp_checked.len(),
        min_tp_minor,
        tn_failures,
        tp_failures,
        note: format!(
            "sampled verification over {} pairs; coefficients are continuous or piecewise-constant representatives",
            pairs.len()
        ),
        structure,
        pairs,
    })
}

/// RK4 solution of `z' = A(t) z` from `(t0, z0)` to `t_end`.
pub fn solve_z(sys: &LtvSystem, t0: f64, z0: &[f64], t_end: f64, step: f64) -> Result<Trajectory> {
    if z0.len() != sys.n {
        return Err(Error::invalid(format!(
            "initial state has length {} but the system has dimension {}",
            z0.len(),
            sys.n
        )));
    }
    sys.check_times(t0, t_end)?;
    let f = |t: f64, z: &[f64], dz: &mut [f64]| sys.rhs(t, z, dz);
    ode::integrate(&f, t0, z0, t_end, step, |_, _| Ok(()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroKind {
    /// Sign change between the bracketing samples.
    Crossing,
    /// Touches the zero band without changing sign.
    Touch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroEvent {
    pub t_left: f64,
    pub t_right: f64,
    pub kind: ZeroKind,
    #[serde(skip)]
    left_index: usize,
    #[serde(skip)]
    right_index: usize,
}

impl ZeroEvent {
    /// Sample indices bracketing the zero.
    pub fn indices(&self) -> (usize, usize) {
        (self.left_index, self.right_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub coordinate: usize,
    pub isolated_zeros: Vec<ZeroEvent>,
    /// Observed count on the simulated window; a lower bound of the count
    /// on the whole interval.
    pub count: usize,
    pub zero_on_interval: bool,
    pub zero_tol: f64,
    pub min_sep: f64,
}

/// Counts isolated zeros of one coordinate along `traj`.
///
/// Sign changes between consecutive samples are crossings. Runs of one or
/// two samples inside the zero band are single zeros (crossing or touch,
/// depending on the signs around them). Runs of three or more samples mark
/// `zero_on_interval` and are not counted. Events whose brackets lie
/// closer than `min_sep` (measured between bracket midpoints) merge into one.
pub fn count_isolated_zeros(traj: &Trajectory, coord: usize, zero_tol: f64, min_sep: f64) -> Result<ZeroCount> {
    if traj.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    if coord >= traj.dim() {
        return Err(Error::IndexOutOfRange(format!(
            "coordinate {coord} out of range for dimension {}",
            traj.dim()
        )));
    }
    let v = traj.coordinate(coord);
    let len = v.len();
    let small = |k: usize| v[k].abs() <= zero_tol;
    let mut raw: Vec<(usize, usize)> = Vec::new();
    let mut zero_on_interval = false;
    let mut k = 0;
    while k < len {
        if small(k) {
            let start = k;
            while k < len && small(k) {
                k += 1;
            }
            let end = k - 1;
            if end - start + 1 >= 3 {
                zero_on_interval = true;
            } else {
                raw.push((start.saturating_sub(1), (end + 1).min(len - 1)));
            }
        } else {
            if k + 1 < len && !small(k + 1) && (v[k] > 0.0) != (v[k + 1] > 0.0) {
                raw.push((k, k + 1));
            }
            k += 1;
        }
    }
    let mid = |l: usize, r: usize| 0.5 * (traj.times[l] + traj.times[r]);
    let mut merged: Vec<(usize, usize)> = Vec::new();
    let mut prev_mid = f64::NEG_INFINITY;
    for (l, r) in raw {
        let m = mid(l, r);
        match merged.last_mut() {
            Some(last) if m - prev_mid < min_sep => last.1 = r,
            _ => merged.push((l, r)),
        }
        prev_mid = m;
    }
    let events: Vec<ZeroEvent> = merged
        .into_iter()
        .map(|(l, r)| {
            let crossing = !small(l) && !small(r) && (v[l] > 0.0) != (v[r] > 0.0);
            ZeroEvent {
                t_left: traj.times[l],
                t_right: traj.times[r],
                kind: if crossing { ZeroKind::Crossing } else { ZeroKind::Touch },
                left_index: l,
                right_index: r,
            }
        })
        .collect();
    Ok(ZeroCount {
        coordinate: coord,
        count: events.len(),
        isolated_zeros: events,
        zero_on_interval,
        zero_tol,
        min_sep,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropCheck {
    pub coordinate: usize,
    pub t_left: f64,
    pub t_right: f64,
    pub s_plus_before: usize,
    pub s_plus_after: usize,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplusReport {
    pub s_plus: Vec<usize>,
    pub non_increasing: bool,
    /// First sample index at which `s+` increased.
    pub first_increase: Option<usize>,
    pub drops: Vec<DropCheck>,
    pub passed: bool,
}

/// Checks that `s+(z(t))` never increases along `traj`, and that it drops
/// strictly across every detected crossing of the first and last
/// coordinates.
pub fn splus_monotone(traj: &Trajectory, zero_tol: f64) -> Result<SplusReport> {
    if traj.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let seq: Vec<usize> = traj
        .states
        .iter()
        .map(|s| signvar::s_plus(s, zero_tol))
        .collect();
    let first_increase = seq.windows(2).position(|w| w[1] > w[0]).map(|k| k + 1);
    let n = traj.dim();
    let mut coords = vec![0];
    if n > 1 {
        coords.push(n - 1);
    }
    let mut drops = Vec::new();
    for c in coords {
        let zc = count_isolated_zeros(traj, c, zero_tol, 10.0 * traj.step)?;
        for e in zc.isolated_zeros.iter().filter(|e| e.kind == ZeroKind::Crossing) {
            let (l, r) = e.indices();
            drops.push(DropCheck {
                coordinate: c,
                t_left: e.t_left,
                t_right: e.t_right,
                s_plus_before: seq[l],
                s_plus_after: seq[r],
                strict: seq[r] < seq[l],
            });
        }
    }
    let non_increasing = first_increase.is_none();
    let passed = non_increasing && drops.iter().all(|d| d.strict);
    Ok(SplusReport {
        s_plus: seq,
        non_increasing,
        first_increase,
        drops,
        passed,
    })
}
