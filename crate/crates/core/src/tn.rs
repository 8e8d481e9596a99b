//! Totally nonnegative (TN), totally positive (TP) and oscillatory matrices.
//!
//! Classification enumerates every square minor, so it is capped at
//! [`BRUTE_FORCE_CAP`]. [`is_tp_fast`] only looks at minors built from
//! consecutive rows and consecutive columns, which is enough to decide TP
//! (not TN) and works at any size.
//!
//! All indices are 0-based.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{det_lu, Matrix};
use crate::par::Exec;

/// Largest dimension accepted by [`classify`].
pub const BRUTE_FORCE_CAP: usize = 10;

/// Scale-aware minor tolerance: `1e-9 * max(1, ||M||_inf)`.
pub fn default_tol(m: &Matrix) -> f64 {
    1e-9 * m.norm_inf().max(1.0)
}

/// Row and column selection of a square submatrix. Both lists are strictly
/// increasing and of equal length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinorIndex {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl MinorIndex {
    pub fn new(rows: Vec<usize>, cols: Vec<usize>) -> Self {
        MinorIndex { rows, cols }
    }

    pub fn full(n: usize) -> Self {
        MinorIndex {
            rows: (0..n).collect(),
            cols: (0..n).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok_list = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|&i| i < n);
        if self.rows.is_empty() || self.rows.len() != self.cols.len() {
            return Err(Error::invalid(format!(
                "minor index needs equal, nonempty row/column lists (got {} and {})",
                self.rows.len(),
                self.cols.len()
            )));
        }
        if self.rows.len() > n || !ok_list(&self.rows) || !ok_list(&self.cols) {
            return Err(Error::IndexOutOfRange(format!(
                "rows {:?} / cols {:?} must be strictly increasing within 0..{n}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorWitness {
    pub index: MinorIndex,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnClassification {
    pub is_tn: bool,
    pub is_tp: bool,
    pub is_nonsingular: bool,
    pub is_irreducible: bool,
    pub is_oscillatory: bool,
    /// Minor that broke TN if the matrix is not TN, otherwise the minor that
    /// broke TP; absent for TP matrices.
    pub witness: Option<MinorWitness>,
    pub min_minor: f64,
    pub det: f64,
    pub tol: f64,
    pub minors_checked: usize,
    /// For oscillatory matrices, whether `M^(n-1)` classified TP.
    pub power_is_tp: Option<bool>,
}

fn minor_of(m: &Matrix, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    let e = |a: usize, b: usize| m[(rows[a], cols[b])];
    match k {
        1 => e(0, 0),
        2 => e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0),
        3 => {
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
                - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        _ => {
            let mut data = Vec::with_capacity(k * k);
            for &r in rows {
                for &c in cols {
                    data.push(m[(r, c)]);
                }
            }
            det_lu(k, data)
        }
    }
}

/// Determinant of the submatrix selected by `idx`. Orders up to 3 use the
/// cofactor formula, larger orders LU with partial pivoting.
pub fn minor(m: &Matrix, idx: &MinorIndex) -> Result<f64> {
    idx.validate(m.n())?;
    Ok(minor_of(m, &idx.rows, &idx.cols))
}

/// All strictly increasing `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Strong connectivity of the directed graph with an edge `i -> j` whenever
/// `|m[i][j]| > tol`, `i != j`.
pub fn is_irreducible(m: &Matrix, tol: f64) -> bool {
    let n = m.n();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let v = if forward { m[(i, j)] } else { m[(j, i)] };
                if i != j && !seen[j] && v.abs() > tol {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

pub fn classify(m: &Matrix, tol: f64) -> Result<TnClassification> {
    classify_with(m, tol, Exec::default())
}

pub fn classify_with(m: &Matrix, tol: f64, exec: Exec) -> Result<TnClassification> {
    classify_inner(m, tol, exec, true)
}

fn classify_inner(m: &Matrix, tol: f64, exec: Exec, check_power: bool) -> Result<TnClassification> {
    let n = m.n();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::Capacity {
            n,
            cap: BRUTE_FORCE_CAP,
        });
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be nonnegative"));
    }

    let row_sets: Vec<Vec<usize>> = (1..=n).flat_map(|k| combinations(n, k)).collect();
    // Per row set: (minimum minor, its column set, count).
    let partial = exec.map_slice(&row_sets, |rows| {
        let mut best: Option<(f64, Vec<usize>)> = None;
        let cols_all = combinations(n, rows.len());
        let count = cols_all.len();
        for cols in cols_all {
            let v = minor_of(m, rows, &cols);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, cols));
            }
        }
        (best.unwrap(), count)
    });

    let mut minors_checked = 0;
    let mut worst: Option<MinorWitness> = None;
    for (rows, ((v, cols), count)) in row_sets.iter().zip(partial) {
        minors_checked += count;
        if worst.as_ref().is_none_or(|w| v < w.value) {
            worst = Some(MinorWitness {
                index: MinorIndex::new(rows.clone(), cols),
                value: v,
            });
        }
    }
    let worst = worst.expect("at least one minor");
    let min_minor = worst.value;

    let is_tn = min_minor >= -tol;
    let is_tp = min_minor > tol;
    let det = m.det();
    let is_nonsingular = det.abs() > tol;
    let is_irreducible = is_irreducible(m, tol);
    let is_oscillatory = is_tn && is_nonsingular && is_irreducible;

    let power_is_tp = if !is_oscillatory || !check_power {
        None
    } else if n == 1 {
        Some(is_tp)
    } else {
        let p = m.pow((n - 1) as u32);
        let ptol = tol / m.norm_inf().max(1.0) * p.norm_inf().max(1.0);
        Some(classify_inner(&p, ptol, exec, false)?.is_tp)
    };

    Ok(TnClassification {
        is_tn,
        is_tp,
        is_nonsingular,
        is_irreducible,
        is_oscillatory,
        witness: (!is_tp).then_some(worst),
        min_minor,
        det,
        tol,
        minors_checked,
        power_is_tp,
    })
}

/// TP test restricted to minors with consecutive rows and consecutive
/// columns. Decides total positivity exactly (in exact arithmetic) at
/// `O(n^5)` cost instead of exponential.
pub fn is_tp_fast(m: &Matrix, tol: f64) -> bool {
    contiguous_tp_witness(m, tol).is_none()
}

/// First contiguous minor that is `<= tol`, if any.
pub fn contiguous_tp_witness(m: &Matrix, tol: f64) -> Option<MinorWitness> {
    let n = m.n();
    for k in 1..=n {
        for r0 in 0..=n - k {
            let rows: Vec<usize> = (r0..r0 + k).collect();
            for c0 in 0..=n - k {
                let cols: Vec<usize> = (c0..c0 + k).collect();
                let v = minor_of(m, &rows, &cols);
                if !(v > tol) {
                    return Some(MinorWitness {
                        index: MinorIndex::new(rows, cols),
                        value: v,
                    });
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// Elementary bidiagonal matrix `I + p E[i][i-1]` (lower) or
/// `I + p E[i-1][i]` (upper), with `1 <= i < n`.
pub fn make_eb(n: usize, i: usize, p: f64, side: Side) -> Result<Matrix> {
    make_geb(&vec![1.0; n], i, p, side)
}

/// Generalized elementary bidiagonal matrix: the diagonal `d` replaces the
/// identity in [`make_eb`].
pub fn make_geb(d: &[f64], i: usize, p: f64, side: Side) -> Result<Matrix> {
    let n = d.len();
    if n < 2 || i == 0 || i >= n {
        return Err(Error::IndexOutOfRange(format!(
            "bidiagonal index {i} must lie in 1..{n}"
        )));
    }
    if !p.is_finite() || d.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("bidiagonal entries must be finite"));
    }
    let mut m = Matrix::from_diag(d);
    match side {
        Side::Lower => m[(i, i - 1)] = p,
        Side::Upper => m[(i - 1, i)] = p,
    }
    Ok(m)
}

/// Tridiagonal matrix with diagonal `a`, superdiagonal `b`, subdiagonal `c`,
/// together with the dominance test `a[i] >= b[i] + c[i-1]` (missing band
/// entries read as zero). Dominance implies TN.
pub fn tridiagonal_dominant(a: &[f64], b: &[f64], c: &[f64]) -> Result<(Matrix, bool)> {
    if b.iter().chain(c).any(|&v| v < 0.0) {
        return Err(Error::invalid(
            "off-diagonal bands must be nonnegative for the dominance test",
        ));
    }
    let m = Matrix::tridiagonal(a, b, c)?;
    let n = a.len();
    let dominant = (0..n).all(|i| {
        let up = if i + 1 < n { b[i] } else { 0.0 };
        let down = if i > 0 { c[i - 1] } else { 0.0 };
        a[i] >= up + down
    });
    Ok((m, dominant))
}

/// `k` seeded TN GEB factors: side and position uniform, `p ~ U[0, 2]`,
/// diagonal entries `~ U[0, 2]`.
pub fn random_geb_factors(n: usize, k: usize, seed: u64) -> Result<Vec<Matrix>> {
    if n < 2 {
        return Err(Error::invalid("GEB factors need n >= 2"));
    }
    if k == 0 {
        return Err(Error::invalid("factor count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let side = if rng.gen_bool(0.5) { Side::Lower } else { Side::Upper };
            let i = rng.gen_range(1..n);
            let p = rng.gen_range(0.0..2.0);
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            make_geb(&d, i, p, side)
        })
        .collect()
}

/// Seeded product of `k` TN GEB factors; TN by closure under products.
pub fn random_tn(n: usize, k: usize, seed: u64) -> Result<Matrix> {
    let factors = random_geb_factors(n, k, seed)?;
    Ok(factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| &acc * f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps_matrix(eps: f64) -> Matrix {
        Matrix::tridiagonal(&[1.0; 3], &[eps; 2], &[eps; 2]).unwrap()
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 4), vec![vec![0, 1, 2, 3]]);
        assert!(combinations(3, 4).is_empty());
    }

    #[test]
    fn identity_minor_and_classification() {
        let i3 = Matrix::identity(3);
        assert_eq!(minor(&i3, &MinorIndex::new(vec![0, 1], vec![0, 1])).unwrap(), 1.0);
        let c = classify(&i3, default_tol(&i3)).unwrap();
        assert!(c.is_tn);
        assert!(!c.is_tp);
        assert!(!c.is_irreducible);
        assert!(!c.is_oscillatory);
        assert_eq!(c.witness.unwrap().value, 0.0);
    }

    #[test]
    fn eps_matrix_is_oscillatory() {
        let a = eps_matrix(0.25);
        assert!((minor(&a, &MinorIndex::full(3)).unwrap() - 0.875).abs() < 1e-15);
        let c = classify(&a, default_tol(&a)).unwrap();
        assert!(c.is_tn && c.is_nonsingular && c.is_irreducible && c.is_oscillatory);
        assert_eq!(c.power_is_tp, Some(true));
        let sq = a.pow(2);
        assert!(is_tp_fast(&sq, default_tol(&sq)));
        assert!(classify(&sq, default_tol(&sq)).unwrap().is_tp);
    }

    #[test]
    fn all_ones_is_singular() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let c = classify(&m, default_tol(&m)).unwrap();
        assert!(c.is_tn);
        assert!(!c.is_nonsingular);
        assert!(!c.is_oscillatory);
    }

    #[test]
    fn one_by_one() {
        for (x, tn, tp) in [(2.0, true, true), (0.0, true, false), (-1.0, false, false)] {
            let m = Matrix::from_rows(&[vec![x]]).unwrap();
            let c = classify(&m, 1e-9).unwrap();
            assert_eq!((c.is_tn, c.is_tp, c.is_oscillatory), (tn, tp, tp));
        }
    }

    #[test]
    fn capacity_and_bad_index() {
        let big = Matrix::identity(11);
        assert!(matches!(classify(&big, 1e-9), Err(Error::Capacity { .. })));
        let m = Matrix::identity(3);
        assert!(minor(&m, &MinorIndex::new(vec![1, 0], vec![0, 1])).is_err());
        assert!(minor(&m, &MinorIndex::new(vec![0], vec![3])).is_err());
        assert!(minor(&m, &MinorIndex::new(vec![0, 1], vec![0])).is_err());
    }

    #[test]
    fn negative_entry_witness() {
        let m = Matrix::from_rows(&[vec![1.0, -0.5], vec![0.0, 1.0]]).unwrap();
        let c = classify(&m, 1e-9).unwrap();
        assert!(!c.is_tn);
        let w = c.witness.unwrap();
        assert_eq!(w.index, MinorIndex::new(vec![0], vec![1]));
        assert_eq!(w.value, -0.5);
    }

    #[test]
    fn eb_examples() {
        assert_eq!(make_eb(3, 1, 0.0, Side::Lower).unwrap(), Matrix::identity(3));
        let l = make_eb(2, 1, 1.0, Side::Lower).unwrap();
        assert_eq!(l, Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap());
        let u = make_eb(3, 2, 0.5, Side::Upper).unwrap();
        assert_eq!(u[(1, 2)], 0.5);
        assert!(classify(&u, 1e-9).unwrap().is_tn);
        assert!(make_eb(3, 0, 1.0, Side::Lower).is_err());
        assert!(make_eb(3, 3, 1.0, Side::Lower).is_err());
    }

    #[test]
    fn geb_examples() {
        assert_eq!(
            make_geb(&[1.0; 4], 2, 0.3, Side::Upper).unwrap(),
            make_eb(4, 2, 0.3, Side::Upper).unwrap()
        );
        let z = make_geb(&[0.0; 3], 1, 1.0, Side::Lower).unwrap();
        assert_eq!(z.as_slice().iter().filter(|v| **v != 0.0).count(), 1);
        assert!(classify(&z, 1e-9).unwrap().is_tn);
        let g = make_geb(&[1.0, 2.0, 3.0], 1, 0.5, Side::Lower).unwrap();
        assert!(classify(&g, 1e-9).unwrap().is_tn);
        let neg = make_geb(&[1.0, 2.0, 3.0], 1, -0.5, Side::Lower).unwrap();
        assert!(!classify(&neg, 1e-9).unwrap().is_tn);
    }

    #[test]
    fn dominance_examples() {
        let (m, dom) = tridiagonal_dominant(&[1.0; 3], &[0.25; 2], &[0.25; 2]).unwrap();
        assert!(dom);
        assert!(classify(&m, 1e-9).unwrap().is_tn);
        let (_, dom) = tridiagonal_dominant(&[0.0, 0.0], &[1.0], &[1.0]).unwrap();
        assert!(!dom);
        let (m, dom) = tridiagonal_dominant(&[2.0, 3.0, 2.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(dom);
        let c = classify(&m, 1e-9).unwrap();
        assert!(c.is_tn && c.is_oscillatory);
        assert!(tridiagonal_dominant(&[1.0, 1.0], &[-1.0], &[0.0]).is_err());
    }

    #[test]
    fn random_tn_is_tn_and_det_multiplies() {
        for seed in 0..50 {
            let factors = random_geb_factors(5, 6, seed).unwrap();
            let m = random_tn(5, 6, seed).unwrap();
            assert!(classify(&m, default_tol(&m)).unwrap().is_tn, "seed {seed}");
            let prod: f64 = factors.iter().map(Matrix::det).product();
            assert!((m.det() - prod).abs() <= 1e-12 * prod.abs().max(1.0));
        }
        assert!(random_tn(3, 0, 1).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let m = random_tn(7, 12, 3).unwrap();
        let tol = default_tol(&m);
        assert_eq!(
            classify_with(&m, tol, Exec::Sequential).unwrap(),
            classify_with(&m, tol, Exec::Parallel).unwrap()
        );
    }
}
