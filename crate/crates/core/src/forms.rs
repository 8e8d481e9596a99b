//! Vector-field library and the registry of built-in systems.
//!
//! User-defined systems are coefficient tables for one of three fixed
//! forms, all with analytic Jacobians:
//!
//! * `linear`: `f(x) = A x`.
//! * `flow_chain`: for `i = 0..n`,
//!   `f_i = s_i + m_i(t) [u_i (1 + x_{i+1})^2 / 4 + d_{i-1} x_{i-1} / (K + x_{i-1})] - q_i x_i`
//!   with `m_i(t) = 1 + amp_i sin(2 pi t / P + phase_i)`. Positive `u_i`
//!   gives a positive superdiagonal; `d_i` drives the subdiagonal.
//! * `poly_tridiagonal`: `f_i = sum_k c_{i,k} x_i^k + l_{i-1} x_{i-1} + r_i x_{i+1}`.
//!
//! Every form accepts extra linear `couplings` `f_row += coef * x_col`,
//! which is how non-tridiagonal variants are expressed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Right-hand side `f(t, x)` of a nonlinear system.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Analytic Jacobian, if available.
    fn jacobian(&self, _t: f64, _x: &[f64]) -> Option<Matrix> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldForm {
    Linear {
        a: Matrix,
        #[serde(default)]
        couplings: Vec<Coupling>,
    },
    FlowChain {
        source: Vec<f64>,
        decay: Vec<f64>,
        forward: Vec<f64>,
        backward: Vec<f64>,
        saturation: f64,
        #[serde(default)]
        amplitude: Vec<f64>,
        #[serde(default)]
        phase: Vec<f64>,
        #[serde(default = "one")]
        forcing_period: f64,
        #[serde(default)]
        couplings: Vec<Coupling>,
    },
    PolyTridiagonal {
        coeffs: Vec<Vec<f64>>,
        sub: Vec<f64>,
        sup: Vec<f64>,
        #[serde(default)]
        couplings: Vec<Coupling>,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldForm {
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::invalid("field dimension must be positive"));
        }
        let len = |name: &str, v: &[f64], want: usize| {
            if v.len() == want {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} has length {} (expected {want})",
                    v.len()
                )))
            }
        };
        match self {
            FieldForm::Linear { .. } => {}
            FieldForm::FlowChain {
                source,
                decay,
                forward,
                backward,
                saturation,
                amplitude,
                phase,
                forcing_period,
                ..
            } => {
                len("decay", decay, n)?;
                len("forward", forward, n - 1)?;
                len("backward", backward, n - 1)?;
                if !amplitude.is_empty() {
                    len("amplitude", amplitude, n)?;
                }
                if !phase.is_empty() {
                    len("phase", phase, n)?;
                }
                if !(*saturation > 0.0) {
                    return Err(Error::invalid("saturation must be positive"));
                }
                if !(*forcing_period > 0.0) {
                    return Err(Error::invalid("forcing_period must be positive"));
                }
                if amplitude.iter().any(|a| a.abs() >= 1.0) {
                    return Err(Error::invalid("modulation amplitudes must lie in (-1, 1)"));
                }
                let all = source.iter().chain(decay).chain(forward).chain(backward);
                if all.clone().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("flow-chain coefficients must be finite"));
                }
            }
            FieldForm::PolyTridiagonal { coeffs, sub, sup, .. } => {
                len("sub", sub, n - 1)?;
                len("sup", sup, n - 1)?;
                if coeffs.iter().flatten().chain(sub).chain(sup).any(|v| !v.is_finite()) {
                    return Err(Error::invalid("polynomial coefficients must be finite"));
                }
            }
        }
        for c in self.couplings() {
            if c.row >= n || c.col >= n || !c.coef.is_finite() {
                return Err(Error::IndexOutOfRange(format!(
                    "coupling ({}, {}) outside dimension {n}",
                    c.row, c.col
                )));
            }
        }
        Ok(())
    }

    pub fn couplings(&self) -> &[Coupling] {
        match self {
            FieldForm::Linear { couplings, .. }
            | FieldForm::FlowChain { couplings, .. }
            | FieldForm::PolyTridiagonal { couplings, .. } => couplings,
        }
    }

    /// Whether `f` depends on `t`.
    pub fn is_time_varying(&self) -> bool {
        match self {
            FieldForm::FlowChain { amplitude, .. } => amplitude.iter().any(|a| *a != 0.0),
            _ => false,
        }
    }

    fn modulation(amplitude: &[f64], phase: &[f64], period: f64, i: usize, t: f64) -> f64 {
        let amp = amplitude.get(i).copied().unwrap_or(0.0);
        if amp == 0.0 {
            return 1.0;
        }
        let ph = phase.get(i).copied().unwrap_or(0.0);
        1.0 + amp * (2.0 * PI * t / period + ph).sin()
    }
}

impl VectorField for FieldForm {
    fn dim(&self) -> usize {
        match self {
            FieldForm::Linear { a, .. } => a.n(),
            FieldForm::FlowChain { source, .. } => source.len(),
            FieldForm::PolyTridiagonal { coeffs, .. } => coeffs.len(),
        }
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        match self {
            FieldForm::Linear { a, .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = a.row(i).iter().zip(x).map(|(p, q)| p * q).sum();
                }
            }
            FieldForm::FlowChain {
                source,
                decay,
                forward,
                backward,
                saturation,
                amplitude,
                phase,
                forcing_period,
                ..
            } => {
                for i in 0..n {
                    let mut drive = 0.0;
                    if i + 1 < n {
                        drive += forward[i] * (1.0 + x[i + 1]).powi(2) / 4.0;
                    }
                    if i > 0 {
                        drive += backward[i - 1] * x[i - 1] / (saturation + x[i - 1]);
                    }
                    let m = Self::modulation(amplitude, phase, *forcing_period, i, t);
                    out[i] = source[i] + m * drive - decay[i] * x[i];
                }
            }
            FieldForm::PolyTridiagonal { coeffs, sub, sup, .. } => {
                for i in 0..n {
                    // Horner
                    let mut p = 0.0;
                    for c in coeffs[i].iter().rev() {
                        p = p * x[i] + c;
                    }
                    if i > 0 {
                        p += sub[i - 1] * x[i - 1];
                    }
                    if i + 1 < n {
                        p += sup[i] * x[i + 1];
                    }
                    out[i] = p;
                }
            }
        }
        for c in self.couplings() {
            out[c.row] += c.coef * x[c.col];
        }
    }

    fn jacobian(&self, t: f64, x: &[f64]) -> Option<Matrix> {
        let n = self.dim();
        let mut j = match self {
            FieldForm::Linear { a, .. } => a.clone(),
            FieldForm::FlowChain {
                decay,
                forward,
                backward,
                saturation,
                amplitude,
                phase,
                forcing_period,
                ..
            } => {
                let mut j = Matrix::zeros(n);
                for i in 0..n {
                    let m = Self::modulation(amplitude, phase, *forcing_period, i, t);
                    j[(i, i)] = -decay[i];
                    if i + 1 < n {
                        j[(i, i + 1)] = m * forward[i] * (1.0 + x[i + 1]) / 2.0;
                    }
                    if i > 0 {
                        let k = saturation;
                        j[(i, i - 1)] = m * backward[i - 1] * k / (k + x[i - 1]).powi(2);
                    }
                }
                j
            }
            FieldForm::PolyTridiagonal { coeffs, sub, sup, .. } => {
                let mut j = Matrix::zeros(n);
                for i in 0..n {
                    let mut dp = 0.0;
                    for (k, c) in coeffs[i].iter().enumerate().skip(1).rev() {
                        dp = dp * x[i] + k as f64 * c;
                    }
                    j[(i, i)] = dp;
                    if i > 0 {
                        j[(i, i - 1)] = sub[i - 1];
                    }
                    if i + 1 < n {
                        j[(i, i + 1)] = sup[i];
                    }
                }
                j
            }
        };
        for c in self.couplings() {
            j[(c.row, c.col)] += c.coef;
        }
        Some(j)
    }
}

/// Forcing period of a system, or time invariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Period {
    Periodic(f64),
    TimeInvariant,
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Period::Periodic(t) => s.serialize_f64(*t),
            Period::TimeInvariant => s.serialize_str("time_invariant"),
        }
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match Value::deserialize(d)? {
            Value::Number(n) => {
                let t = n.as_f64().unwrap_or(f64::NAN);
                if t > 0.0 && t.is_finite() {
                    Ok(Period::Periodic(t))
                } else {
                    Err(D::Error::custom("period must be a positive number"))
                }
            }
            Value::String(s) if s == "time_invariant" => Ok(Period::TimeInvariant),
            other => Err(D::Error::custom(format!(
                "period must be a positive number or \"time_invariant\", got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = BoxDomain { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        BoxDomain {
            lo: vec![lo; n],
            hi: vec![hi; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return Err(Error::invalid("box bounds must be nonempty and of equal length"));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::invalid("box needs finite bounds with lo < hi"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Index of the first coordinate outside the box by more than `tol`.
    pub fn violation(&self, x: &[f64], tol: f64) -> Option<usize> {
        (0..self.dim()).find(|&i| !(x[i] >= self.lo[i] - tol && x[i] <= self.hi[i] + tol))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && self.violation(x, tol).is_none()
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| rng.gen_range(*l..*h))
            .collect()
    }
}

/// Serializable description of a nonlinear system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub name: String,
    pub field: FieldForm,
    pub period: Period,
    pub omega: BoxDomain,
}

/// Either a built-in system with parameter overrides or a full spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum SystemSource {
    Builtin {
        builtin: String,
        #[serde(default)]
        overrides: Option<Value>,
    },
    Spec(SystemSpec),
}

impl SystemSource {
    pub fn resolve(&self) -> Result<SystemSpec> {
        match self {
            SystemSource::Spec(s) => Ok(s.clone()),
            SystemSource::Builtin { builtin, overrides } => {
                let base = builtin_spec(builtin).ok_or_else(|| {
                    Error::invalid(format!(
                        "unknown built-in system {builtin:?}; known: {}",
                        BUILTIN_NAMES.join(", ")
                    ))
                })?;
                let Some(ov) = overrides else {
                    return Ok(base);
                };
                let mut v = serde_json::to_value(&base).expect("spec serializes");
                merge(&mut v, ov);
                serde_json::from_value(v)
                    .map_err(|e| Error::invalid(format!("overrides for {builtin}: {e}")))
            }
        }
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "d1",
    "d2",
    "d3",
    "d3_time_invariant",
    "d3_coupled_13",
    "d3_no_superdiag",
    "cubic_1d",
];

/// Built-in systems:
///
/// * `d1`: linear `x' = J x`, `J` tridiagonal with positive off-diagonals,
///   on `[-1, 1]^3`.
/// * `d2`: linear 2x2 lower-triangular `[[-1, 0], [1, -1]]` on `[-1, 1]^2`.
/// * `d3`: 3-state periodically forced flow chain on `[0, 1]^3`, period 1,
///   with positive superdiagonal and `df_2/dx_1 == 0`.
/// * `d3_time_invariant`: `d3` without forcing.
/// * `d3_coupled_13`: `d3` plus the coupling `f_1 += 0.2 x_3`.
/// * `d3_no_superdiag`: `d3` with `df_1/dx_2 == 0`.
/// * `cubic_1d`: `x' = x - x^3` on `[-2, 2]`.
pub fn builtin_spec(name: &str) -> Option<SystemSpec> {
    let d3_field = |amplitude: Vec<f64>, forward: Vec<f64>, couplings: Vec<Coupling>| FieldForm::FlowChain {
        source: vec![0.1, 0.05, 0.05],
        decay: vec![1.5, 1.2, 1.1],
        forward,
        backward: vec![0.0, 0.9],
        saturation: 0.5,
        amplitude,
        phase: vec![0.0, 1.0, 2.0],
        forcing_period: 1.0,
        couplings,
    };
    let forced = || vec![0.5, 0.5, 0.5];
    let spec = match name {
        "d1" => SystemSpec {
            name: name.into(),
            field: FieldForm::Linear {
                a: Matrix::tridiagonal(&[-2.0, -2.5, -2.0], &[1.0, 0.5], &[0.8, 1.2]).unwrap(),
                couplings: vec![],
            },
            period: Period::TimeInvariant,
            omega: BoxDomain::cube(3, -1.0, 1.0),
        },
        "d2" => SystemSpec {
            name: name.into(),
            field: FieldForm::Linear {
                a: Matrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, -1.0]]).unwrap(),
                couplings: vec![],
            },
            period: Period::TimeInvariant,
            omega: BoxDomain::cube(2, -1.0, 1.0),
        },
        "d3" => SystemSpec {
            name: name.into(),
            field: d3_field(forced(), vec![0.8, 0.6], vec![]),
            period: Period::Periodic(1.0),
            omega: BoxDomain::cube(3, 0.0, 1.0),
        },
        "d3_time_invariant" => SystemSpec {
            name: name.into(),
            field: d3_field(vec![0.0; 3], vec![0.8, 0.6], vec![]),
            period: Period::TimeInvariant,
            omega: BoxDomain::cube(3, 0.0, 1.0),
        },
        "d3_coupled_13" => SystemSpec {
            name: name.into(),
            field: d3_field(
                forced(),
                vec![0.8, 0.6],
                vec![Coupling {
                    row: 0,
                    col: 2,
                    coef: 0.2,
                }],
            ),
            period: Period::Periodic(1.0),
            omega: BoxDomain::cube(3, 0.0, 1.0),
        },
        "d3_no_superdiag" => SystemSpec {
            name: name.into(),
            field: d3_field(forced(), vec![0.0, 0.6], vec![]),
            period: Period::Periodic(1.0),
            omega: BoxDomain::cube(3, 0.0, 1.0),
        },
        "cubic_1d" => SystemSpec {
            name: name.into(),
            field: FieldForm::PolyTridiagonal {
                coeffs: vec![vec![0.0, 1.0, 0.0, -1.0]],
                sub: vec![],
                sup: vec![],
                couplings: vec![],
            },
            period: Period::TimeInvariant,
            omega: BoxDomain::cube(1, -2.0, 2.0),
        },
        _ => return None,
    };
    Some(spec)
}
