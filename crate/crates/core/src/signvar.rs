//! Sign-variation counts and the variation diminishing checks for TN/TP
//! matrices.
//!
//! Entries with `|y_i| <= zero_tol` are treated as exact zeros everywhere in
//! this module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tn;

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sgn {
    Neg,
    Zero,
    Pos,
}

fn sgn(v: f64, zero_tol: f64) -> Sgn {
    if v.abs() <= zero_tol {
        Sgn::Zero
    } else if v > 0.0 {
        Sgn::Pos
    } else {
        Sgn::Neg
    }
}

/// Number of sign changes after deleting the zero entries.
pub fn s_minus(y: &[f64], zero_tol: f64) -> usize {
    let mut last = None;
    let mut count = 0;
    for s in y.iter().map(|&v| sgn(v, zero_tol)).filter(|&s| s != Sgn::Zero) {
        if last.is_some_and(|l| l != s) {
            count += 1;
        }
        last = Some(s);
    }
    count
}

/// Maximal number of sign changes over all `±1` fillings of the zero
/// entries, in a single scan over the zero runs.
///
/// A leading or trailing run of `L` zeros contributes `L` changes. An
/// interior run of `L` zeros between nonzero entries `u, v` spans `L + 1`
/// gaps; the number of changes across them has the parity of
/// `[sign u != sign v]`, so the run contributes `L + 1` or `L`.
pub fn s_plus(y: &[f64], zero_tol: f64) -> usize {
    let n = y.len();
    let signs: Vec<Sgn> = y.iter().map(|&v| sgn(v, zero_tol)).collect();
    let Some(first) = signs.iter().position(|&s| s != Sgn::Zero) else {
        return n.saturating_sub(1);
    };
    let last = signs.iter().rposition(|&s| s != Sgn::Zero).unwrap();
    let mut count = first + (n - 1 - last);
    let mut prev = signs[first];
    let mut run = 0usize;
    for &s in &signs[first + 1..=last] {
        if s == Sgn::Zero {
            run += 1;
            continue;
        }
        let differ = usize::from(s != prev);
        count += if (run + 1) % 2 == differ { run + 1 } else { run };
        prev = s;
        run = 0;
    }
    count
}

/// Membership in the set where the sign-variation count extends
/// continuously: nonzero endpoints, and every interior zero sits between
/// neighbours of opposite sign.
pub fn membership_v(y: &[f64], zero_tol: f64) -> bool {
    let n = y.len();
    if n == 0 {
        return false;
    }
    let s: Vec<Sgn> = y.iter().map(|&v| sgn(v, zero_tol)).collect();
    if s[0] == Sgn::Zero || s[n - 1] == Sgn::Zero {
        return false;
    }
    (1..n.saturating_sub(1)).all(|i| {
        s[i] != Sgn::Zero
            || matches!(
                (s[i - 1], s[i + 1]),
                (Sgn::Pos, Sgn::Neg) | (Sgn::Neg, Sgn::Pos)
            )
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignProfile {
    pub s_minus: usize,
    pub s_plus: usize,
    #[serde(rename = "in_V")]
    pub in_v: bool,
    /// Sign-variation count, reported only for members of V.
    pub sigma: Option<usize>,
}

impl SignProfile {
    pub fn of(y: &[f64], zero_tol: f64) -> Self {
        let s_minus = s_minus(y, zero_tol);
        let s_plus = s_plus(y, zero_tol);
        let in_v = membership_v(y, zero_tol);
        SignProfile {
            s_minus,
            s_plus,
            in_v,
            sigma: in_v.then_some(s_minus),
        }
    }
}

pub fn sigma(y: &[f64], zero_tol: f64) -> Option<usize> {
    SignProfile::of(y, zero_tol).sigma
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassHint {
    Tn,
    TnNonsingular,
    Tp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseOutcome {
    pub clause: String,
    pub applicable: bool,
    /// `None` when not applicable.
    pub holds: Option<bool>,
}

impl ClauseOutcome {
    fn evaluated(clause: &str, holds: bool) -> Self {
        ClauseOutcome {
            clause: clause.to_string(),
            applicable: true,
            holds: Some(holds),
        }
    }

    fn skipped(clause: &str) -> Self {
        ClauseOutcome {
            clause: clause.to_string(),
            applicable: false,
            holds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdpReport {
    pub class_hint: ClassHint,
    pub x: SignProfile,
    pub ax: SignProfile,
    pub clauses: Vec<ClauseOutcome>,
    /// Whether the hint was confirmed by brute-force classification
    /// (only attempted for `n <= 7`).
    pub hint_verified: bool,
    pub passed: bool,
}

/// Largest dimension for which [`svdp_check`] verifies the class hint.
pub const HINT_CHECK_CAP: usize = 7;

/// Evaluates the sign-variation inequalities that the class hint entitles
/// `A` to.
///
/// * TN: `s-(Ax) <= s-(x)`.
/// * TN nonsingular: additionally `s+(Ax) <= s+(x)`, and `s+(Ax) <= s-(x)`
///   when `x` or `Ax` has no zero entries (otherwise "not applicable").
/// * TP, `x != 0`: additionally `s+(Ax) <= s-(x)` unconditionally.
pub fn svdp_check(a: &Matrix, x: &[f64], hint: ClassHint, zero_tol: f64) -> Result<SvdpReport> {
    let n = a.n();
    if x.len() != n {
        return Err(Error::invalid(format!(
            "vector of length {} does not match matrix dimension {n}",
            x.len()
        )));
    }
    let x_is_zero = x.iter().all(|v| v.abs() <= zero_tol);
    if hint == ClassHint::Tp && x_is_zero {
        return Err(Error::invalid("the TP inequality excludes x = 0"));
    }

    let hint_verified = if n <= HINT_CHECK_CAP {
        let c = tn::classify(a, tn::default_tol(a))?;
        let ok = match hint {
            ClassHint::Tn => c.is_tn,
            ClassHint::TnNonsingular => c.is_tn && c.is_nonsingular,
            ClassHint::Tp => c.is_tp,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "matrix does not classify as {hint:?} (min minor {:e})",
                c.min_minor
            )));
        }
        true
    } else {
        false
    };

    let ax = a.mul_vec(x);
    let px = SignProfile::of(x, zero_tol);
    let pax = SignProfile::of(&ax, zero_tol);
    let no_zero = |v: &[f64]| v.iter().all(|e| e.abs() > zero_tol);

    let mut clauses = vec![ClauseOutcome::evaluated(
        "s_minus(Ax) <= s_minus(x)",
        pax.s_minus <= px.s_minus,
    )];
    if matches!(hint, ClassHint::TnNonsingular | ClassHint::Tp) {
        clauses.push(ClauseOutcome::evaluated(
            "s_plus(Ax) <= s_plus(x)",
            pax.s_plus <= px.s_plus,
        ));
    }
    match hint {
        ClassHint::Tn => {}
        ClassHint::TnNonsingular => {
            let label = "s_plus(Ax) <= s_minus(x) [x or Ax without zeros]";
            if no_zero(x) || no_zero(&ax) {
                clauses.push(ClauseOutcome::evaluated(label, pax.s_plus <= px.s_minus));
            } else {
                clauses.push(ClauseOutcome::skipped(label));
            }
        }
        ClassHint::Tp => clauses.push(ClauseOutcome::evaluated(
            "s_plus(Ax) <= s_minus(x)",
            pax.s_plus <= px.s_minus,
        )),
    }
    let passed = clauses.iter().all(|c| c.holds != Some(false));
    Ok(SvdpReport {
        class_hint: hint,
        x: px,
        ax: pax,
        clauses,
        hint_verified,
        passed,
    })
}
