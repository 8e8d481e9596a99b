//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use rand::Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

fn norm1(a: &Dense) -> f64 {
    let n = a.len();
    (0..n)
        .map(|j| (0..n).map(|i| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring: scale so that the 1-norm is
/// at most 1/2, sum the Taylor series to machine precision, square back.
pub fn expm(a: &Dense) -> Dense {
    let n = a.len();
    let norm = norm1(a);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let b: Dense = a.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
    let mut sum: Dense = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut term = sum.clone();
    for k in 1..40 {
        term = dense_mul(&term, &b);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        let mut biggest = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
                biggest = biggest.max(term[i][j].abs());
            }
        }
        if biggest < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = dense_mul(&sum, &sum);
    }
    sum
}

/// Determinant by Laplace expansion along the first row.
pub fn det_cofactor(a: &Dense) -> f64 {
    let n = a.len();
    match n {
        0 => 1.0,
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => (0..n)
            .map(|j| {
                let sub: Dense = a[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[0][j] * det_cofactor(&sub)
            })
            .sum(),
    }
}

pub fn sub_dense(a: &Dense, rows: &[usize], cols: &[usize]) -> Dense {
    rows.iter().map(|&r| cols.iter().map(|&c| a[r][c]).collect()).collect()
}

/// All increasing index sets of size `k` from `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

/// Smallest minor over all square submatrices, by cofactor expansion.
pub fn min_minor_cofactor(a: &Dense) -> f64 {
    let n = a.len();
    let mut best = f64::INFINITY;
    for k in 1..=n {
        for r in subsets(n, k) {
            for c in subsets(n, k) {
                best = best.min(det_cofactor(&sub_dense(a, &r, &c)));
            }
        }
    }
    best
}

fn signs(y: &[f64], tol: f64) -> Vec<i8> {
    y.iter()
        .map(|&v| if v.abs() <= tol { 0 } else if v > 0.0 { 1 } else { -1 })
        .collect()
}

/// Sign changes of the nonzero entries, counted directly.
pub fn s_minus_naive(y: &[f64], tol: f64) -> usize {
    let nz: Vec<i8> = signs(y, tol).into_iter().filter(|s| *s != 0).collect();
    nz.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Maximum sign changes over every `+-1` filling of the zeros.
pub fn s_plus_enum(y: &[f64], tol: f64) -> usize {
    let s = signs(y, tol);
    let zeros: Vec<usize> = (0..s.len()).filter(|&i| s[i] == 0).collect();
    assert!(zeros.len() <= 16, "enumeration too large");
    let mut best = 0;
    for mask in 0u32..(1 << zeros.len()) {
        let mut filled = s.clone();
        for (b, &i) in zeros.iter().enumerate() {
            filled[i] = if mask & (1 << b) != 0 { 1 } else { -1 };
        }
        best = best.max(filled.windows(2).filter(|w| w[0] != w[1]).count());
    }
    best
}

/// Random vector of length `n` with roughly `zero_frac` exact zeros.
pub fn random_vector<R: Rng>(rng: &mut R, n: usize, zero_frac: f64) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.gen_bool(zero_frac) { 0.0 } else { rng.gen_range(-1.0..1.0) })
        .collect()
}

/// Closed form of `Phi(t, t0)` for the constant lower-triangular system
/// `[[a11, 0], [1, a22]]`.
pub fn triangular_phi(a11: f64, a22: f64, dt: f64) -> Dense {
    let p = if (a11 - a22).abs() < 1e-14 {
        dt * (a11 * dt).exp()
    } else {
        ((a11 * dt).exp() - (a22 * dt).exp()) / (a11 - a22)
    };
    vec![vec![(a11 * dt).exp(), 0.0], vec![p, (a22 * dt).exp()]]
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &Dense) -> f64 {
    a.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max)
}
