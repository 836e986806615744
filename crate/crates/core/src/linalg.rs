//! Complex linear-algebra helpers shared by the channel, coding and recovery
//! modules.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMat, CVec};

/// One draw from CN(0, `variance`): variance/2 on each real component.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Matrix with i.i.d. CN(0, `variance`) entries, drawn in column-major order.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, variance: f64, rng: &mut R) -> CMat {
    let data: Vec<Complex64> = (0..rows * cols).map(|_| complex_gaussian(rng, variance)).collect();
    CMat::from_vec(rows, cols, data)
}

pub fn gaussian_vector<R: Rng + ?Sized>(len: usize, variance: f64, rng: &mut R) -> CVec {
    CVec::from_iterator(len, (0..len).map(|_| complex_gaussian(rng, variance)))
}

/// `A^H r`, computed column by column over contiguous storage.
pub fn adjoint_mul(a: &CMat, r: &CVec) -> CVec {
    debug_assert_eq!(a.nrows(), r.len());
    CVec::from_iterator(a.ncols(), a.column_iter().map(|col| col.dotc(r)))
}

/// `A x` for an `x` given by its nonzero entries.
pub fn mul_sparse(a: &CMat, support: &[usize], values: &[Complex64]) -> CVec {
    let mut out = CVec::zeros(a.nrows());
    for (&j, &v) in support.iter().zip(values) {
        if v != Complex64::new(0.0, 0.0) {
            out.axpy(v, &a.column(j), Complex64::new(1.0, 0.0));
        }
    }
    out
}

/// `A x` skipping the zero entries of a dense `x`.
pub fn mul_dense_skip_zeros(a: &CMat, x: &CVec) -> CVec {
    let mut out = CVec::zeros(a.nrows());
    for (j, &v) in x.iter().enumerate() {
        if v != Complex64::new(0.0, 0.0) {
            out.axpy(v, &a.column(j), Complex64::new(1.0, 0.0));
        }
    }
    out
}

/// Hermitian Gram matrix of the smaller side: `A A^H` when `A` is wide,
/// `A^H A` otherwise. Both share the nonzero spectrum.
pub fn small_gram(a: &CMat) -> CMat {
    let (rows, cols) = a.shape();
    if rows <= cols {
        let mut w = CMat::zeros(rows, rows);
        for col in a.column_iter() {
            for j in 0..rows {
                let cj = col[j].conj();
                if cj == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..=j {
                    w[(i, j)] += col[i] * cj;
                }
            }
        }
        for j in 0..rows {
            for i in 0..j {
                w[(j, i)] = w[(i, j)].conj();
            }
        }
        w
    } else {
        a.adjoint() * a
    }
}

/// Largest singular value of `a`, from the eigenvalues of its small Gram matrix.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let eig = SymmetricEigen::new(small_gram(a));
    eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max).sqrt()
}

pub fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
