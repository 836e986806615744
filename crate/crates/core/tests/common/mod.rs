//! Reference computations written independently of the library, used as
//! oracles by the integration and acceptance suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use otafl::learning::{Dataset, Model};

/// `ρτβ² / (1 + ρτβ)`: mean square of an MMSE estimate of a CN(0, β) entry
/// observed as `√(ρτ) g + CN(0, 1)`.
pub fn mmse_power(snr: f64, beta: f64) -> f64 {
    snr * beta * beta / (1.0 + snr * beta)
}

/// Error variance of that estimate, `β / (1 + ρτβ)`.
pub fn mmse_error(snr: f64, beta: f64) -> f64 {
    beta / (1.0 + snr * beta)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Smallest `‖A x − y‖²` over all `x` with at most `s` nonzeros, by solving
/// the least-squares problem on every support of size `s`.
pub fn brute_force_sparse_ls(a: &DMatrix<Complex64>, y: &DVector<Complex64>, s: usize) -> (f64, Vec<usize>) {
    let mut best = (y.norm_squared(), Vec::new());
    for support in combinations(a.ncols(), s) {
        let sub = DMatrix::from_fn(a.nrows(), s, |r, c| a[(r, support[c])]);
        let gram = sub.adjoint() * &sub;
        let rhs = sub.adjoint() * y;
        let Some(coef) = gram.lu().solve(&rhs) else { continue };
        let obj = (&sub * coef - y).norm_squared();
        if obj < best.0 {
            best = (obj, support);
        }
    }
    best
}

/// Central finite difference of the batch loss along coordinate `i`.
pub fn finite_difference(model: &Model, theta: &[f64], data: &Dataset, idx: &[usize], i: usize, h: f64) -> f64 {
    let mut t = theta.to_vec();
    t[i] = theta[i] + h;
    let plus = model.loss_and_grad(&t, data, idx).unwrap().0;
    t[i] = theta[i] - h;
    let minus = model.loss_and_grad(&t, data, idx).unwrap().0;
    (plus - minus) / (2.0 * h)
}

/// Relative error with a floor on the scale, so coordinates whose true
/// derivative is at round-off level compare absolutely.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
