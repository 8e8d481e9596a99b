//! Periodically forced cooperative systems `x' = f(t, x)` on a box.
//!
//! Structural hypotheses are certified by sampling: the line-averaged
//! Jacobian must be tridiagonal with nonnegative off-diagonals, and either
//! every superdiagonal or every subdiagonal Jacobian entry must stay
//! strictly positive. Convergence is then observed through the period map.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{BoxDomain, Period, SystemSpec, VectorField};
use crate::matrix::Matrix;
use crate::ode::{self, Rk4, Trajectory};
use crate::par::Exec;
use crate::tnds::{self, band_violation, EntryViolation, ZeroCount};

/// Slack allowed when testing membership in `Omega`.
pub const BOX_TOL: f64 = 1e-9;
/// Period used for the period map of time-invariant systems.
pub const PROBE_PERIOD: f64 = 1.0;
pub const DEFAULT_QUAD_POINTS: usize = 8;

#[derive(Clone)]
pub struct NonlinearSystem {
    name: String,
    field: Arc<dyn VectorField>,
    period: Period,
    omega: BoxDomain,
}

impl fmt::Debug for NonlinearSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearSystem")
            .field("name", &self.name)
            .field("n", &self.n())
            .field("period", &self.period)
            .field("omega", &self.omega)
            .finish()
    }
}

impl NonlinearSystem {
    /// Validates dimensions and checks `f(t + T, x) = f(t, x)` (or
    /// independence of `t` for time-invariant systems) on seeded samples.
    pub fn new(name: impl Into<String>, field: Arc<dyn VectorField>, period: Period, omega: BoxDomain) -> Result<Self> {
        omega.validate()?;
        if field.dim() != omega.dim() {
            return Err(Error::invalid(format!(
                "field dimension {} does not match box dimension {}",
                field.dim(),
                omega.dim()
            )));
        }
        if let Period::Periodic(t) = period {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid("period must be positive and finite"));
            }
        }
        let sys = NonlinearSystem {
            name: name.into(),
            field,
            period,
            omega,
        };
        sys.check_periodicity(64, 0x5eed)?;
        Ok(sys)
    }

    pub fn from_spec(spec: &SystemSpec) -> Result<Self> {
        spec.field.validate()?;
        NonlinearSystem::new(
            spec.name.clone(),
            Arc::new(spec.field.clone()),
            spec.period,
            spec.omega.clone(),
        )
    }

    fn check_periodicity(&self, samples: usize, seed: u64) -> Result<()> {
        let shifts: &[f64] = match self.period {
            Period::Periodic(t) => &[t, 2.0 * t],
            Period::TimeInvariant => &[0.37, 1.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n();
        let mut f0 = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        for _ in 0..samples {
            let t = rng.gen_range(0.0..self.probe_period());
            let x = self.omega.sample(&mut rng);
            self.field.eval(t, &x, &mut f0);
            for &s in shifts {
                self.field.eval(t + s, &x, &mut f1);
                let scale = f0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                let dev = f0.iter().zip(&f1).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if !(dev <= 1e-9 * scale) {
                    return Err(Error::invalid(format!(
                        "f is not {}: |f(t + {s}, x) - f(t, x)| = {dev:e} at t = {t}",
                        match self.period {
                            Period::Periodic(_) => "periodic with the declared period",
                            Period::TimeInvariant => "time-invariant",
                        }
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.omega.dim()
    }

    pub fn period(&self) -> Period {
        self.period
    }

    pub fn is_time_invariant(&self) -> bool {
        self.period == Period::TimeInvariant
    }

    /// `T` for periodic systems, [`PROBE_PERIOD`] otherwise.
    pub fn probe_period(&self) -> f64 {
        match self.period {
            Period::Periodic(t) => t,
            Period::TimeInvariant => PROBE_PERIOD,
        }
    }

    pub fn omega(&self) -> &BoxDomain {
        &self.omega
    }

    pub fn field(&self) -> &dyn VectorField {
        self.field.as_ref()
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.field.eval(t, x, &mut out);
        out
    }

    fn require_inside(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::invalid(format!(
                "state of length {} for a system of dimension {}",
                x.len(),
                self.n()
            )));
        }
        if !self.omega.contains(x, BOX_TOL) {
            return Err(Error::Domain { state: x.to_vec() });
        }
        Ok(())
    }

    /// `count` uniform samples from `Omega`.
    pub fn random_states(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.omega.sample(&mut rng)).collect()
    }
}

/// Central differences with `h_i = 1e-6 * max(1, |x_i|)`.
pub fn jacobian_fd(sys: &NonlinearSystem, t: f64, x: &[f64]) -> Matrix {
    let n = sys.n();
    let mut j = Matrix::zeros(n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for c in 0..n {
        let h = 1e-6 * x[c].abs().max(1.0);
        xp[c] = x[c] + h;
        sys.field.eval(t, &xp, &mut fp);
        xp[c] = x[c] - h;
        sys.field.eval(t, &xp, &mut fm);
        xp[c] = x[c];
        for r in 0..n {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

fn jacobian_unchecked(sys: &NonlinearSystem, t: f64, x: &[f64]) -> Matrix {
    sys.field.jacobian(t, x).unwrap_or_else(|| jacobian_fd(sys, t, x))
}

/// Jacobian at `(t, x)`: analytic when the field provides one, otherwise
/// central differences.
pub fn jacobian_at(sys: &NonlinearSystem, t: f64, x: &[f64]) -> Result<Matrix> {
    sys.require_inside(x)?;
    Ok(jacobian_unchecked(sys, t, x))
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn segment_point(xa: &[f64], xb: &[f64], r: f64) -> Vec<f64> {
    xa.iter().zip(xb).map(|(a, b)| r * a + (1.0 - r) * b).collect()
}

/// `int_0^1 J(t, r xa + (1 - r) xb) dr` by Gauss-Legendre quadrature.
pub fn line_avg_jacobian(sys: &NonlinearSystem, t: f64, xa: &[f64], xb: &[f64], quad_points: usize) -> Result<Matrix> {
    if quad_points == 0 {
        return Err(Error::invalid("quad_points must be positive"));
    }
    sys.require_inside(xa)?;
    sys.require_inside(xb)?;
    let (nodes, weights) = gauss_legendre(quad_points);
    let mut avg = Matrix::zeros(sys.n());
    for (r, w) in nodes.iter().zip(&weights) {
        let x = segment_point(xa, xb, *r);
        sys.require_inside(&x)?;
        avg.axpy(*w, &jacobian_unchecked(sys, t, &x));
    }
    Ok(avg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssumptionOptions {
    pub n_time: usize,
    pub n_pairs: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Off-diagonal entries `>= -tol` count as nonnegative.
    pub tol: f64,
    /// Band entries must exceed this to count as positive.
    pub margin: f64,
    pub quad_points: usize,
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        AssumptionOptions {
            n_time: 50,
            n_pairs: 200,
            n_samples: 10_000,
            seed: 0,
            tol: 1e-9,
            margin: 1e-8,
            quad_points: DEFAULT_QUAD_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairViolation {
    pub t: f64,
    pub xa: Vec<f64>,
    pub xb: Vec<f64>,
    #[serde(flatten)]
    pub entry: EntryViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointViolation {
    pub t: f64,
    pub x: Vec<f64>,
    #[serde(flatten)]
    pub entry: EntryViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption1Report {
    /// Line-averaged Jacobian in the tridiagonal nonnegative-band class at
    /// every sample.
    #[serde(rename = "a1_in_M")]
    pub a1_in_m: bool,
    pub worst_violation: Option<PairViolation>,
    /// Same test for the pointwise Jacobian at every quadrature node.
    #[serde(rename = "pointwise_in_M")]
    pub pointwise_in_m: bool,
    pub worst_pointwise: Option<PointViolation>,
    pub samples_used: usize,
    pub pointwise_samples: usize,
    pub n_time: usize,
    pub n_pairs: usize,
    pub quad_points: usize,
    pub seed: u64,
    pub tol: f64,
}

/// Samples `n_time` times in `[0, T)` and `n_pairs` point pairs in `Omega`
/// and tests the averaged and pointwise Jacobians for every combination.
pub fn check_assumption1(sys: &NonlinearSystem, opts: &AssumptionOptions) -> Assumption1Report {
    check_assumption1_with(sys, opts, Exec::default())
}

pub fn check_assumption1_with(sys: &NonlinearSystem, opts: &AssumptionOptions, exec: Exec) -> Assumption1Report {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let period = sys.probe_period();
    let times: Vec<f64> = (0..opts.n_time).map(|_| rng.gen_range(0.0..period)).collect();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..opts.n_pairs)
        .map(|_| (sys.omega.sample(&mut rng), sys.omega.sample(&mut rng)))
        .collect();
    let q = opts.quad_points.max(1);
    let (nodes, weights) = gauss_legendre(q);

    let partial = exec.map_slice(&times, |&t| {
        let mut worst_avg: Option<PairViolation> = None;
        let mut worst_pt: Option<PointViolation> = None;
        for (xa, xb) in &pairs {
            let mut avg = Matrix::zeros(sys.n());
            for (r, w) in nodes.iter().zip(&weights) {
                let x = segment_point(xa, xb, *r);
                let j = jacobian_unchecked(sys, t, &x);
                if let Some(e) = band_violation(&j, opts.tol) {
                    if worst_pt.as_ref().is_none_or(|p| e.excess > p.entry.excess) {
                        worst_pt = Some(PointViolation { t, x, entry: e });
                    }
                }
                avg.axpy(*w, &j);
            }
            if let Some(e) = band_violation(&avg, opts.tol) {
                if worst_avg.as_ref().is_none_or(|p| e.excess > p.entry.excess) {
                    worst_avg = Some(PairViolation {
                        t,
                        xa: xa.clone(),
                        xb: xb.clone(),
                        entry: e,
                    });
                }
            }
        }
        (worst_avg, worst_pt)
    });

    let mut worst_violation: Option<PairViolation> = None;
    let mut worst_pointwise: Option<PointViolation> = None;
    for (a, p) in partial {
        if let Some(a) = a {
            if worst_violation.as_ref().is_none_or(|w| a.entry.excess > w.entry.excess) {
                worst_violation = Some(a);
            }
        }
        if let Some(p) = p {
            if worst_pointwise.as_ref().is_none_or(|w| p.entry.excess > w.entry.excess) {
                worst_pointwise = Some(p);
            }
        }
    }
    let samples_used = opts.n_time * opts.n_pairs;
    Assumption1Report {
        a1_in_m: worst_violation.is_none(),
        pointwise_in_m: worst_pointwise.is_none(),
        worst_violation,
        worst_pointwise,
        samples_used,
        pointwise_samples: samples_used * q,
        n_time: opts.n_time,
        n_pairs: opts.n_pairs,
        quad_points: q,
        seed: opts.seed,
        tol: opts.tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMinimum {
    pub row: usize,
    pub col: usize,
    pub min: f64,
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Superdiagonal,
    Subdiagonal,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Report {
    pub a2_superdiag_positive: bool,
    pub superdiag_minima: Vec<BandMinimum>,
    pub a2_subdiag_positive: bool,
    pub subdiag_minima: Vec<BandMinimum>,
    pub route: Option<Route>,
    pub certified: bool,
    pub samples_used: usize,
    pub seed: u64,
    pub margin: f64,
    pub note: String,
}

const OBSERVABILITY_NOTE: &str =
    "only the band-positivity sufficient condition is tested; the observability route is out of scope";

/// Minimum of every super- and subdiagonal Jacobian entry over seeded
/// samples of `[0, T) x Omega`. Positivity of either band certifies that
/// the first (resp. last) coordinate of every difference of solutions has
/// only isolated zeros.
pub fn check_assumption2(sys: &NonlinearSystem, opts: &AssumptionOptions) -> Assumption2Report {
    check_assumption2_with(sys, opts, Exec::default())
}

pub fn check_assumption2_with(sys: &NonlinearSystem, opts: &AssumptionOptions, exec: Exec) -> Assumption2Report {
    let n = sys.n();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let period = sys.probe_period();
    let samples: Vec<(f64, Vec<f64>)> = (0..opts.n_samples)
        .map(|_| (rng.gen_range(0.0..period), sys.omega.sample(&mut rng)))
        .collect();
    let jacs = exec.map_slice(&samples, |(t, x)| jacobian_unchecked(sys, *t, x));

    let band = |offset_row: usize, offset_col: usize| -> Vec<BandMinimum> {
        (0..n.saturating_sub(1))
            .map(|k| {
                let (row, col) = (k + offset_row, k + offset_col);
                let mut best = BandMinimum {
                    row,
                    col,
                    min: f64::INFINITY,
                    t: 0.0,
                    x: vec![],
                };
                for (j, (t, x)) in jacs.iter().zip(&samples) {
                    let v = j[(row, col)];
                    if v < best.min {
                        best.min = v;
                        best.t = *t;
                        best.x = x.clone();
                    }
                }
                best
            })
            .collect()
    };
    let sup = band(0, 1);
    let sub = band(1, 0);
    let positive = |b: &[BandMinimum]| !samples.is_empty() && b.iter().all(|m| m.min > opts.margin);
    let sup_ok = positive(&sup);
    let sub_ok = positive(&sub);
    let route = match (sup_ok, sub_ok) {
        (true, true) => Some(Route::Both),
        (true, false) => Some(Route::Superdiagonal),
        (false, true) => Some(Route::Subdiagonal),
        (false, false) => None,
    };
    let note = if route.is_some() {
        OBSERVABILITY_NOTE.to_string()
    } else {
        format!("uncertified: neither band is positive, so entrainment is not certified; {OBSERVABILITY_NOTE}")
    };
    Assumption2Report {
        a2_superdiag_positive: sup_ok,
        superdiag_minima: sup,
        a2_subdiag_positive: sub_ok,
        subdiag_minima: sub,
        route,
        certified: route.is_some(),
        samples_used: samples.len(),
        seed: opts.seed,
        margin: opts.margin,
        note,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub system: String,
    pub assumption1: Assumption1Report,
    pub assumption2: Assumption2Report,
    pub certified: bool,
}

pub fn check_assumptions(sys: &NonlinearSystem, opts: &AssumptionOptions, exec: Exec) -> AssumptionReport {
    let assumption1 = check_assumption1_with(sys, opts, exec);
    let assumption2 = check_assumption2_with(sys, opts, exec);
    AssumptionReport {
        system: sys.name.clone(),
        certified: assumption1.a1_in_m && assumption2.certified,
        assumption1,
        assumption2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    #[serde(rename = "a1_in_M")]
    pub a1_in_m: bool,
    pub a2_route: Option<Route>,
    pub certified: bool,
    pub seed: u64,
    pub samples_used: usize,
}

impl From<&AssumptionReport> for Certification {
    fn from(r: &AssumptionReport) -> Self {
        Certification {
            a1_in_m: r.assumption1.a1_in_m,
            a2_route: r.assumption2.route,
            certified: r.certified,
            seed: r.assumption1.seed,
            samples_used: r.assumption1.samples_used + r.assumption2.samples_used,
        }
    }
}

fn invariance_check(sys: &NonlinearSystem) -> impl FnMut(f64, &[f64]) -> Result<()> + '_ {
    move |t, x| match sys.omega.violation(x, BOX_TOL) {
        None => Ok(()),
        Some(coord) => Err(Error::InvarianceViolation {
            time: t,
            coord,
            value: x[coord],
        }),
    }
}

/// RK4 trajectory from `x0` at time 0; aborts if the state leaves `Omega`
/// by more than [`BOX_TOL`].
pub fn simulate(sys: &NonlinearSystem, x0: &[f64], t_end: f64, step: f64) -> Result<Trajectory> {
    simulate_from(sys, 0.0, x0, t_end, step)
}

pub fn simulate_from(sys: &NonlinearSystem, t0: f64, x0: &[f64], t_end: f64, step: f64) -> Result<Trajectory> {
    sys.require_inside(x0)?;
    let f = |t: f64, x: &[f64], dx: &mut [f64]| sys.field.eval(t, x, dx);
    ode::integrate(&f, t0, x0, t_end, step, invariance_check(sys))
}

fn simulate_final(sys: &NonlinearSystem, t0: f64, x0: &[f64], t_end: f64, step: f64) -> Result<Vec<f64>> {
    let f = |t: f64, x: &[f64], dx: &mut [f64]| sys.field.eval(t, x, dx);
    ode::integrate_final(&f, t0, x0, t_end, step, invariance_check(sys))
}

/// Largest step `<= step` that divides the period evenly.
fn period_step(period: f64, step: f64) -> f64 {
    period / (period / step).ceil()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrderingOptions {
    pub horizon_periods: usize,
    pub step: f64,
    pub zero_tol: f64,
    /// Analysis stops once `|z|_inf` falls below this.
    pub z_floor: f64,
    /// The variational residual is evaluated only while `|z|_inf` exceeds
    /// this.
    pub residual_floor: f64,
    pub residual_tol: f64,
    pub quad_points: usize,
}

impl Default for OrderingOptions {
    fn default() -> Self {
        OrderingOptions {
            horizon_periods: 50,
            step: 1e-3,
            zero_tol: 1e-9,
            z_floor: 1e-9,
            residual_floor: 1e-7,
            residual_tol: 1e-4,
            quad_points: DEFAULT_QUAD_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub horizon: f64,
    /// End of the analysed window (earlier than `horizon` when the
    /// trajectories merge below `z_floor`).
    pub window_end: f64,
    /// Zeros of the first coordinate of the normalised difference.
    pub z1_zeros: ZeroCount,
    pub zero_bound: usize,
    pub zero_bound_holds: bool,
    pub last_sign_change: Option<f64>,
    /// `+1` when `x1(t, a) > x1(t, b)` after the last sign change.
    pub settled_sign: Option<i8>,
    pub settled_from: f64,
    pub inconclusive: bool,
    pub preserved_from_start: bool,
    pub max_residual: f64,
    pub residual_samples: usize,
    pub residual_consistent: bool,
    pub passed: bool,
    pub options: OrderingOptions,
}

/// Simulates `x(t, a)` and `x(t, b)`, locates the last sign change of the
/// first coordinate of their difference and checks that a strict sign
/// holds afterwards. Also checks `z' = A(t) z` with the line-averaged
/// Jacobian by central differences.
pub fn ordering_check(sys: &NonlinearSystem, a: &[f64], b: &[f64], opts: &OrderingOptions) -> Result<OrderingReport> {
    if a == b {
        return Err(Error::invalid("ordering check needs distinct initial states"));
    }
    let period = sys.probe_period();
    let horizon = opts.horizon_periods as f64 * period;
    let h = period_step(period, opts.step);
    let ta = simulate(sys, a, horizon, h)?;
    let tb = simulate(sys, b, horizon, h)?;

    let diffs: Vec<Vec<f64>> = ta
        .states
        .iter()
        .zip(&tb.states)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect();
    let active = diffs
        .iter()
        .position(|z| sup_norm(z) < opts.z_floor)
        .unwrap_or(diffs.len())
        .max(1);
    let normalized = Trajectory {
        times: ta.times[..active].to_vec(),
        states: diffs[..active]
            .iter()
            .map(|z| {
                let s = sup_norm(z);
                z.iter().map(|v| v / s).collect()
            })
            .collect(),
        step: h,
    };
    let window_end = normalized.times[active - 1];
    let zeros = tnds::count_isolated_zeros(&normalized, 0, opts.zero_tol, 10.0 * h)?;
    let last = zeros.isolated_zeros.last();
    let tail_start = last.map_or(0, |e| e.indices().1);
    let settled_from = normalized.times[tail_start];
    let tail: Vec<f64> = normalized.states[tail_start..].iter().map(|z| z[0]).collect();
    let settled_sign = if tail.iter().all(|v| *v > opts.zero_tol) {
        Some(1)
    } else if tail.iter().all(|v| *v < -opts.zero_tol) {
        Some(-1)
    } else {
        None
    };
    let inconclusive = settled_sign.is_none() || window_end - settled_from < period;
    let initial_sign = (a[0] - b[0]).partial_cmp(&0.0).map(|o| o as i8);
    let preserved_from_start = zeros.isolated_zeros.is_empty()
        && !zeros.zero_on_interval
        && settled_sign.is_some()
        && settled_sign == initial_sign;

    let mut max_residual = 0.0f64;
    let mut residual_samples = 0;
    for k in 1..active.saturating_sub(1) {
        let z = &diffs[k];
        let zn = sup_norm(z);
        if zn < opts.residual_floor {
            break;
        }
        let dt = ta.times[k + 1] - ta.times[k - 1];
        if (dt - 2.0 * h).abs() > 1e-9 * h {
            continue;
        }
        let abar = line_avg_jacobian(sys, ta.times[k], &ta.states[k], &tb.states[k], opts.quad_points)?;
        let az = abar.mul_vec(z);
        let r = (0..sys.n())
            .map(|i| ((diffs[k + 1][i] - diffs[k - 1][i]) / dt - az[i]).abs())
            .fold(0.0f64, f64::max);
        max_residual = max_residual.max(r / zn);
        residual_samples += 1;
    }
    let residual_consistent = max_residual < opts.residual_tol;
    let zero_bound = sys.n().saturating_sub(1);
    let zero_bound_holds = zeros.count <= zero_bound;
    Ok(OrderingReport {
        a: a.to_vec(),
        b: b.to_vec(),
        horizon,
        window_end,
        zero_bound,
        zero_bound_holds,
        last_sign_change: last.map(|e| e.t_right),
        settled_sign,
        settled_from,
        inconclusive,
        preserved_from_start,
        max_residual,
        residual_samples,
        residual_consistent,
        passed: !inconclusive && zero_bound_holds && residual_consistent,
        z1_zeros: zeros,
        options: *opts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntrainmentOptions {
    pub tol: f64,
    pub max_periods: usize,
    pub step: f64,
    /// Consecutive sub-tolerance residuals required for convergence.
    pub streak: usize,
    /// Run the assumption checks and attach the certification.
    pub certify: bool,
}

impl Default for EntrainmentOptions {
    fn default() -> Self {
        EntrainmentOptions {
            tol: 1e-6,
            max_periods: 200,
            step: 1e-3,
            streak: 3,
            certify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntrainmentReport {
    pub system: String,
    pub x0: Vec<f64>,
    pub period: f64,
    pub step: f64,
    /// `x(kT)` for `k = 0..=periods_used`.
    pub poincare_iterates: Vec<Vec<f64>>,
    /// `|x((k+1)T) - x(kT)|_inf`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// First period of the final sub-tolerance streak.
    pub converged_at: Option<usize>,
    pub limit_state: Option<Vec<f64>>,
    pub periods_used: usize,
    /// Max deviation between the two periods following the limit state.
    pub periodic_deviation: Option<f64>,
    pub periodic_verified: bool,
    /// Index from which `x1(kT)` is monotone.
    pub x1_monotone_from: Option<usize>,
    pub x1_eventually_monotone: bool,
    pub certification: Option<Certification>,
    /// Convergence observed and the hypotheses certified.
    pub certified: bool,
    pub options: EntrainmentOptions,
}

/// Iterates the period map from `x0` until `streak` consecutive residuals
/// fall below `tol` or `max_periods` is exhausted.
pub fn entrainment(sys: &NonlinearSystem, x0: &[f64], opts: &EntrainmentOptions) -> Result<EntrainmentReport> {
    let cert = opts
        .certify
        .then(|| Certification::from(&check_assumptions(sys, &AssumptionOptions::default(), Exec::default())));
    entrainment_inner(sys, x0, opts, cert)
}

/// [`entrainment`] from several initial states, sharing one
/// certification run.
pub fn entrainment_sweep(
    sys: &NonlinearSystem,
    x0s: &[Vec<f64>],
    opts: &EntrainmentOptions,
    exec: Exec,
) -> Vec<Result<EntrainmentReport>> {
    let cert = opts
        .certify
        .then(|| Certification::from(&check_assumptions(sys, &AssumptionOptions::default(), exec)));
    exec.map_slice(x0s, |x0| entrainment_inner(sys, x0, opts, cert.clone()))
}

fn entrainment_inner(
    sys: &NonlinearSystem,
    x0: &[f64],
    opts: &EntrainmentOptions,
    certification: Option<Certification>,
) -> Result<EntrainmentReport> {
    if !(opts.tol > 0.0) || !(opts.step > 0.0) {
        return Err(Error::invalid("tol and step must be positive"));
    }
    sys.require_inside(x0)?;
    let period = sys.probe_period();
    let h = period_step(period, opts.step);
    let streak = opts.streak.max(1);

    let mut iterates = vec![x0.to_vec()];
    let mut residuals = Vec::new();
    let mut run = 0;
    let mut x = x0.to_vec();
    for k in 0..opts.max_periods {
        let t0 = k as f64 * period;
        let next = simulate_final(sys, t0, &x, t0 + period, h)?;
        residuals.push(sup_dist(&next, &x));
        run = if residuals[k] < opts.tol { run + 1 } else { 0 };
        iterates.push(next.clone());
        x = next;
        if run >= streak {
            break;
        }
    }
    let periods_used = residuals.len();
    let converged = run >= streak;
    let converged_at = converged.then(|| periods_used - run);

    let (periodic_deviation, limit_state) = if converged {
        let t0 = periods_used as f64 * period;
        let traj = simulate_from(sys, t0, &x, t0 + 2.0 * period, h)?;
        let m = (traj.len() - 1) / 2;
        let dev = (0..=m).map(|j| sup_dist(&traj.states[j], &traj.states[j + m])).fold(0.0f64, f64::max);
        (Some(dev), Some(x.clone()))
    } else {
        (None, None)
    };
    let periodic_verified = periodic_deviation.is_some_and(|d| d < 10.0 * opts.tol);

    let x1: Vec<f64> = iterates.iter().map(|s| s[0]).collect();
    let monotone_from = monotone_tail_start(&x1);
    let x1_eventually_monotone = match (converged_at, monotone_from) {
        (Some(c), Some(m)) => m <= c,
        _ => false,
    };
    let certified = converged && periodic_verified && certification.as_ref().is_some_and(|c| c.certified);
    Ok(EntrainmentReport {
        system: sys.name.clone(),
        x0: x0.to_vec(),
        period,
        step: h,
        poincare_iterates: iterates,
        residuals,
        converged,
        converged_at,
        limit_state,
        periods_used,
        periodic_deviation,
        periodic_verified,
        x1_monotone_from: monotone_from,
        x1_eventually_monotone,
        certification,
        certified,
        options: *opts,
    })
}

/// Smallest `m` such that `seq[m..]` is monotone, ignoring increments at
/// roundoff level.
fn monotone_tail_start(seq: &[f64]) -> Option<usize> {
    if seq.is_empty() {
        return None;
    }
    let scale = seq.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-14 * scale;
    let mut sign = 0i8;
    let mut start = seq.len() - 1;
    for k in (0..seq.len() - 1).rev() {
        let d = seq[k + 1] - seq[k];
        let s = if d.abs() <= floor { 0 } else if d > 0.0 { 1 } else { -1 };
        if s != 0 && sign != 0 && s != sign {
            break;
        }
        if s != 0 {
            sign = s;
        }
        start = k;
    }
    Some(start)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumOptions {
    pub tol: f64,
    pub t_max: f64,
    pub step: f64,
    /// Extra time simulated after convergence to measure drift.
    pub settle_time: f64,
    pub certify: bool,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tol: 1e-8,
            t_max: 200.0,
            step: 1e-3,
            settle_time: 1.0,
            certify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub system: String,
    pub x0: Vec<f64>,
    pub converged: bool,
    pub t_converged: Option<f64>,
    /// State at the end of the stationarity run.
    pub equilibrium: Option<Vec<f64>>,
    /// `|f|_inf` at `equilibrium` (at `t_max` when not converged).
    pub f_norm: f64,
    /// `|f|_inf` when the threshold was first crossed.
    pub f_norm_at_detection: f64,
    pub drift: Option<f64>,
    pub stationary: bool,
    pub certification: Option<Certification>,
    pub certified: bool,
    pub options: EquilibriumOptions,
}

/// Simulates a time-invariant system until `|f(x)|_inf < tol`, then keeps
/// going for `settle_time` and requires drift below `10 tol`.
pub fn equilibrium_convergence(sys: &NonlinearSystem, x0: &[f64], opts: &EquilibriumOptions) -> Result<EquilibriumReport> {
    let cert = opts
        .certify
        .then(|| Certification::from(&check_assumptions(sys, &AssumptionOptions::default(), Exec::default())));
    equilibrium_inner(sys, x0, opts, cert)
}

pub fn equilibrium_sweep(
    sys: &NonlinearSystem,
    x0s: &[Vec<f64>],
    opts: &EquilibriumOptions,
    exec: Exec,
) -> Vec<Result<EquilibriumReport>> {
    let cert = opts
        .certify
        .then(|| Certification::from(&check_assumptions(sys, &AssumptionOptions::default(), exec)));
    exec.map_slice(x0s, |x0| equilibrium_inner(sys, x0, opts, cert.clone()))
}

fn equilibrium_inner(
    sys: &NonlinearSystem,
    x0: &[f64],
    opts: &EquilibriumOptions,
    certification: Option<Certification>,
) -> Result<EquilibriumReport> {
    if !sys.is_time_invariant() {
        return Err(Error::invalid("equilibrium convergence needs a time-invariant system"));
    }
    if !(opts.tol > 0.0) || !(opts.step > 0.0) || !(opts.t_max >= 0.0) {
        return Err(Error::invalid("tol and step must be positive, t_max nonnegative"));
    }
    sys.require_inside(x0)?;
    let n = sys.n();
    let f = |t: f64, x: &[f64], dx: &mut [f64]| sys.field.eval(t, x, dx);
    let mut check = invariance_check(sys);
    let mut rk = Rk4::new(n);
    let mut fx = vec![0.0; n];
    let mut x = x0.to_vec();
    let grid = ode::time_grid(0.0, opts.t_max, opts.step);
    let mut t_converged = None;
    for (k, &t) in grid.iter().enumerate() {
        sys.field.eval(t, &x, &mut fx);
        if sup_norm(&fx) < opts.tol {
            t_converged = Some(t);
            break;
        }
        if k + 1 == grid.len() {
            break;
        }
        rk.step(&f, t, grid[k + 1] - t, &mut x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { last_valid_time: t });
        }
        check(grid[k + 1], &x)?;
    }
    let f_norm_at_detection = sup_norm(&fx);
    let (drift, equilibrium, f_norm) = match t_converged {
        Some(t) => {
            let traj = simulate_from(sys, t, &x, t + opts.settle_time, opts.step)?;
            let d = traj.states.iter().map(|s| sup_dist(s, &x)).fold(0.0f64, f64::max);
            let end = traj.last_state().to_vec();
            let f_end = sup_norm(&sys.eval(traj.times[traj.len() - 1], &end));
            (Some(d), Some(end), f_end)
        }
        None => (None, None, f_norm_at_detection),
    };
    let stationary = drift.is_some_and(|d| d < 10.0 * opts.tol);
    let converged = t_converged.is_some();
    let certified = converged && stationary && certification.as_ref().is_some_and(|c| c.certified);
    Ok(EquilibriumReport {
        system: sys.name.clone(),
        x0: x0.to_vec(),
        converged,
        t_converged,
        equilibrium,
        f_norm,
        f_norm_at_detection,
        drift,
        stationary,
        certification,
        certified,
        options: *opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::builtin_spec;

    fn builtin(name: &str) -> NonlinearSystem {
        NonlinearSystem::from_spec(&builtin_spec(name).unwrap()).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for q in 1..=10 {
            let (x, w) = gauss_legendre(q);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            // Exact up to degree 2q - 1.
            let deg = 2 * q - 1;
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((approx - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "q = {q}");
        }
    }

    #[test]
    fn linear_jacobian_and_average() {
        let sys = builtin("d1");
        let crate::forms::FieldForm::Linear { a, .. } = builtin_spec("d1").unwrap().field else {
            panic!("d1 is linear");
        };
        let j = jacobian_at(&sys, 0.0, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(j, a);
        assert!(jacobian_fd(&sys, 0.0, &[0.1, 0.2, 0.3]).max_abs_diff(&a) < 1e-9);
        for q in 1..4 {
            let m = line_avg_jacobian(&sys, 0.0, &[0.5, 0.0, -0.5], &[0.0, 0.9, 0.1], q).unwrap();
            assert!(m.max_abs_diff(&a) < 1e-14);
        }
        assert!(matches!(
            jacobian_at(&sys, 0.0, &[2.0, 0.0, 0.0]),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn degenerate_segment() {
        let sys = builtin("d3");
        let x = [0.3, 0.6, 0.2];
        let m = line_avg_jacobian(&sys, 0.4, &x, &x, 8).unwrap();
        assert!(m.max_abs_diff(&jacobian_at(&sys, 0.4, &x).unwrap()) < 1e-14);
    }

    #[test]
    fn periodicity_is_enforced() {
        let mut spec = builtin_spec("d3").unwrap();
        spec.period = Period::Periodic(0.7);
        assert!(NonlinearSystem::from_spec(&spec).is_err());
        spec.period = Period::TimeInvariant;
        assert!(NonlinearSystem::from_spec(&spec).is_err());
        spec.period = Period::Periodic(2.0);
        assert!(NonlinearSystem::from_spec(&spec).is_ok());
    }

    #[test]
    fn simulate_rejects_exit_from_box() {
        // The flow toward 1 leaves [0.5, 0.9].
        let mut spec = builtin_spec("cubic_1d").unwrap();
        spec.omega = BoxDomain::new(vec![0.5], vec![0.9]).unwrap();
        let sys = NonlinearSystem::from_spec(&spec).unwrap();
        let err = simulate(&sys, &[0.8], 5.0, 1e-3).unwrap_err();
        assert!(matches!(err, Error::InvarianceViolation { coord: 0, .. }));
        assert!(matches!(simulate(&sys, &[0.2], 1.0, 1e-3), Err(Error::Domain { .. })));
    }

    #[test]
    fn equilibrium_start_is_constant() {
        let sys = builtin("cubic_1d");
        let traj = simulate(&sys, &[1.0], 2.0, 1e-2).unwrap();
        assert!(traj.states.iter().all(|s| s[0] == 1.0));
        let r = equilibrium_convergence(&sys, &[1.0], &EquilibriumOptions::default()).unwrap();
        assert!(r.converged && r.stationary && r.certified);
        assert_eq!(r.t_converged, Some(0.0));
    }

    #[test]
    fn cubic_phase_line() {
        let sys = builtin("cubic_1d");
        for (x0, want) in [(0.3, 1.0), (-1.7, -1.0), (0.0, 0.0), (1.9, 1.0)] {
            let r = equilibrium_convergence(&sys, &[x0], &EquilibriumOptions::default()).unwrap();
            assert!(r.converged, "x0 = {x0}");
            assert!((r.equilibrium.unwrap()[0] - want).abs() < 1e-7, "x0 = {x0}");
        }
    }

    #[test]
    fn time_invariant_equilibrium_converges_at_zero() {
        let sys = builtin("cubic_1d");
        let opts = EntrainmentOptions {
            certify: false,
            ..Default::default()
        };
        let r = entrainment(&sys, &[-1.0], &opts).unwrap();
        assert!(r.converged);
        assert_eq!(r.converged_at, Some(0));
        assert!(r.x1_eventually_monotone);
    }

    #[test]
    fn one_period_budget_is_not_converged() {
        let sys = builtin("d3");
        let opts = EntrainmentOptions {
            max_periods: 1,
            certify: false,
            ..Default::default()
        };
        let r = entrainment(&sys, &[0.5, 0.5, 0.5], &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.periods_used, 1);
        assert!(r.limit_state.is_none());
    }

    #[test]
    fn monotone_tail() {
        assert_eq!(monotone_tail_start(&[0.0, 1.0, 0.5, 0.4, 0.3]), Some(1));
        assert_eq!(monotone_tail_start(&[1.0, 2.0, 3.0]), Some(0));
        assert_eq!(monotone_tail_start(&[1.0]), Some(0));
        assert_eq!(monotone_tail_start(&[1.0, 0.0, 1.0, 0.0]), Some(2));
    }

    #[test]
    fn assumptions_on_builtins() {
        let opts = AssumptionOptions {
            n_time: 5,
            n_pairs: 20,
            n_samples: 500,
            ..Default::default()
        };
        let d3 = check_assumptions(&builtin("d3"), &opts, Exec::Sequential);
        assert!(d3.certified);
        assert_eq!(d3.assumption2.route, Some(Route::Superdiagonal));
        assert_eq!(d3.assumption2.subdiag_minima[0].min, 0.0);

        let coupled = check_assumption1(&builtin("d3_coupled_13"), &opts);
        assert!(!coupled.a1_in_m);
        let w = coupled.worst_violation.unwrap().entry;
        assert_eq!((w.row, w.col), (0, 2));

        let cut = check_assumption2(&builtin("d3_no_superdiag"), &opts);
        assert!(!cut.certified);
        assert_eq!(cut.superdiag_minima[0].min, 0.0);
        assert!(cut.note.starts_with("uncertified"));
    }
}
