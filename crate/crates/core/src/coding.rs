//! Client-side update encoding.
//!
//! A real update of length `d` is packed into `d/2` complex symbols, the
//! accumulated residual is added, the `S` largest-magnitude symbols are kept
//! and the rest is carried over to the next round. The sparse vector is then
//! compressed to `T` samples by a random measurement matrix with spectral
//! norm `1/1.01`.

use std::cmp::Ordering;

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::{gaussian_matrix, mul_sparse, spectral_norm};
use crate::{CMat, CVec, Error, Result};

/// Factor applied on top of the spectral norm when normalizing a measurement
/// matrix, giving `‖A‖₂ = 1/1.01`.
pub const NORM_MARGIN: f64 = 1.01;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A real update packed as `x_i = Δθ_i + j Δθ_{i+d/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedUpdate {
    pub x: CVec,
    /// Length of the real vector before packing; odd lengths were padded with
    /// one trailing zero.
    pub real_len: usize,
}

impl PackedUpdate {
    pub fn half_len(&self) -> usize {
        self.x.len()
    }
}

pub fn split(delta: &[f64]) -> PackedUpdate {
    let half = delta.len().div_ceil(2);
    let at = |i: usize| delta.get(i).copied().unwrap_or(0.0);
    let x = CVec::from_iterator(half, (0..half).map(|i| Complex64::new(at(i), at(i + half))));
    PackedUpdate {
        x,
        real_len: delta.len(),
    }
}

/// Inverse of [`split`] for even lengths: real parts first, then imaginary parts.
pub fn unsplit(x: &[Complex64]) -> Vec<f64> {
    x.iter().map(|z| z.re).chain(x.iter().map(|z| z.im)).collect()
}

/// [`unsplit`] followed by dropping the padding of an odd-length update.
pub fn unsplit_to_len(x: &[Complex64], real_len: usize) -> Vec<f64> {
    let mut v = unsplit(x);
    v.truncate(real_len);
    v
}

/// An `S`-sparse complex vector of length `half_len`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseUpdate {
    pub half_len: usize,
    /// Strictly increasing indices.
    pub support: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SparseUpdate {
    pub fn zeros(half_len: usize) -> Self {
        Self {
            half_len,
            support: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Takes the entries of `dense` at `support` (sorted ascending).
    pub fn gather(dense: &CVec, support: Vec<usize>) -> Self {
        let values = support.iter().map(|&i| dense[i]).collect();
        Self {
            half_len: dense.len(),
            support,
            values,
        }
    }

    pub fn densify(&self) -> CVec {
        let mut out = CVec::zeros(self.half_len);
        for (&i, &v) in self.support.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != ZERO).count()
    }
}

/// Error-feedback memory of one client, initially zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientResidual {
    pub r: CVec,
}

impl ClientResidual {
    pub fn zeros(half_len: usize) -> Self {
        Self {
            r: CVec::zeros(half_len),
        }
    }
}

/// Indices of the `s` largest-magnitude entries, ascending. Equal magnitudes
/// keep the lower index; exact zeros are never selected.
pub fn top_s_indices(values: &[Complex64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i] != ZERO).collect();
    if s < idx.len() {
        let mags: Vec<f64> = values.iter().map(|z| z.norm_sqr()).collect();
        let by_rank = |a: &usize, b: &usize| -> Ordering { mags[*b].total_cmp(&mags[*a]).then(a.cmp(b)) };
        if s == 0 {
            idx.clear();
        } else {
            idx.select_nth_unstable_by(s - 1, by_rank);
            idx.truncate(s);
        }
    }
    idx.sort_unstable();
    idx
}

/// `x_full + r`, the vector a client actually sparsifies.
pub fn carrier(x_full: &PackedUpdate, residual: &ClientResidual) -> Result<CVec> {
    if x_full.half_len() != residual.r.len() {
        return Err(Error::dims("residual length", x_full.half_len(), residual.r.len()));
    }
    Ok(&x_full.x + &residual.r)
}

/// Keeps the `s` largest entries of `x_full + r` and returns the new
/// residual `x_full + r − x_sparse`. `s` beyond the length keeps everything.
pub fn sparsify(x_full: &PackedUpdate, residual: &ClientResidual, s: usize) -> Result<(SparseUpdate, ClientResidual)> {
    if s == 0 {
        return Err(Error::invalid("sparsity level must be at least 1"));
    }
    let c = carrier(x_full, residual)?;
    let support = top_s_indices(c.as_slice(), s);
    Ok(split_off(c, support))
}

/// Projects `x_full + r` onto a sparsity pattern chosen elsewhere. Values on
/// the pattern may be zero.
pub fn project_onto_pattern(
    x_full: &PackedUpdate,
    residual: &ClientResidual,
    pattern: &[usize],
) -> Result<(SparseUpdate, ClientResidual)> {
    let c = carrier(x_full, residual)?;
    if let Some(&bad) = pattern.iter().find(|&&i| i >= c.len()) {
        return Err(Error::invalid(format!("pattern index {bad} out of range {}", c.len())));
    }
    Ok(split_off(c, pattern.to_vec()))
}

fn split_off(mut c: CVec, support: Vec<usize>) -> (SparseUpdate, ClientResidual) {
    let sparse = SparseUpdate::gather(&c, support);
    for &i in &sparse.support {
        c[i] = ZERO;
    }
    (sparse, ClientResidual { r: c })
}

/// The pattern-deciding client's own top-`s` index set.
pub fn choose_pattern_from_client(carrier: &CVec, s: usize) -> Vec<usize> {
    top_s_indices(carrier.as_slice(), s)
}

/// A `T × d/2` measurement matrix with `‖A‖₂ = 1/1.01`.
#[derive(Clone, Debug)]
pub struct MeasurementMatrix {
    pub a: CMat,
}

impl MeasurementMatrix {
    /// Scales an arbitrary nonzero matrix to spectral norm `1/1.01`.
    pub fn normalized(raw: CMat) -> Result<Self> {
        let norm = spectral_norm(&raw);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("measurement matrix must be nonzero and finite"));
        }
        Ok(Self {
            a: raw.unscale(NORM_MARGIN * norm),
        })
    }

    /// Square matrix `Q / 1.01` with `Q` unitary. Used for lossless
    /// configurations where `T = d/2`.
    pub fn scaled_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let q = gaussian_matrix(n, n, 1.0, rng).qr().q();
        Ok(Self {
            a: q.unscale(NORM_MARGIN),
        })
    }

    pub fn samples(&self) -> usize {
        self.a.nrows()
    }

    pub fn half_len(&self) -> usize {
        self.a.ncols()
    }
}

/// Draws `A_r` with i.i.d. CN(0,1) entries and returns `A_r / (1.01 ‖A_r‖₂)`.
pub fn make_measurement_matrix<R: Rng + ?Sized>(samples: usize, half_len: usize, rng: &mut R) -> Result<MeasurementMatrix> {
    if samples == 0 || half_len == 0 {
        return Err(Error::invalid("measurement matrix needs T >= 1 and d/2 >= 1"));
    }
    MeasurementMatrix::normalized(gaussian_matrix(samples, half_len, 1.0, rng))
}

/// `x = A x_sparse`.
pub fn encode(sparse: &SparseUpdate, a: &MeasurementMatrix) -> Result<CVec> {
    if sparse.half_len != a.half_len() {
        return Err(Error::dims("sparse update length", a.half_len(), sparse.half_len));
    }
    Ok(mul_sparse(&a.a, &sparse.support, &sparse.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn packed(values: &[Complex64]) -> PackedUpdate {
        PackedUpdate {
            x: CVec::from_column_slice(values),
            real_len: 2 * values.len(),
        }
    }

    #[test]
    fn split_examples() {
        assert_eq!(split(&[1.0, 2.0, 3.0, 4.0]).x.as_slice(), &[c(1.0, 3.0), c(2.0, 4.0)]);
        assert!(split(&[0.0; 6]).x.iter().all(|z| *z == ZERO));
        assert_eq!(unsplit(&[c(1.0, 3.0), c(2.0, 4.0)]), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unsplit(&[c(0.0, 1.0), c(0.0, 2.0)]), vec![0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn odd_length_is_padded_and_stripped() {
        let v = [1.0, 2.0, 3.0];
        let p = split(&v);
        assert_eq!(p.x.as_slice(), &[c(1.0, 3.0), c(2.0, 0.0)]);
        assert_eq!(unsplit_to_len(p.x.as_slice(), p.real_len), v.to_vec());
    }

    #[test]
    fn sparsify_keeps_largest_magnitude() {
        let x = packed(&[c(3.0, 4.0), c(1.0, 0.0), c(0.0, 2.0)]);
        let (sp, r) = sparsify(&x, &ClientResidual::zeros(3), 1).unwrap();
        assert_eq!(sp.support, vec![0]);
        assert_eq!(sp.values, vec![c(3.0, 4.0)]);
        assert_eq!(r.r.as_slice(), &[ZERO, c(1.0, 0.0), c(0.0, 2.0)]);
    }

    #[test]
    fn keep_all_clears_residual() {
        let x = packed(&[c(3.0, 4.0), c(1.0, 0.0), c(0.0, 2.0)]);
        let r0 = ClientResidual {
            r: CVec::from_column_slice(&[c(0.5, 0.0), c(0.0, 0.5), c(1.0, 1.0)]),
        };
        for s in [3, 10] {
            let (sp, r) = sparsify(&x, &r0, s).unwrap();
            assert_eq!(sp.densify(), &x.x + &r0.r);
            assert!(r.r.iter().all(|z| *z == ZERO));
        }
    }

    #[test]
    fn zero_sparsity_rejected() {
        let x = packed(&[c(1.0, 0.0)]);
        assert!(sparsify(&x, &ClientResidual::zeros(1), 0).is_err());
    }

    #[test]
    fn ties_keep_lower_index() {
        let v = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.5, 0.0)];
        assert_eq!(top_s_indices(&v, 2), vec![0, 1]);
        assert_eq!(top_s_indices(&v, 1), vec![0]);
    }

    #[test]
    fn shared_pattern_projection() {
        let chooser = CVec::from_column_slice(&[c(5.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)]);
        let pattern = choose_pattern_from_client(&chooser, 2);
        assert_eq!(pattern, vec![0, 2]);
        let other = packed(&[ZERO, c(9.0, 0.0), ZERO]);
        let (sp, r) = project_onto_pattern(&other, &ClientResidual::zeros(3), &pattern).unwrap();
        assert_eq!(sp.support, pattern);
        assert_eq!(sp.values, vec![ZERO, ZERO]);
        assert_eq!(r.r[1], c(9.0, 0.0));
    }

    #[test]
    fn measurement_matrix_norm() {
        let a = make_measurement_matrix(12, 40, &mut seeded(1)).unwrap();
        assert!((spectral_norm(&a.a) - 1.0 / NORM_MARGIN).abs() < 1e-6);
        let one = MeasurementMatrix::normalized(CMat::from_element(1, 1, c(2.0, 0.0))).unwrap();
        assert!((one.a[(0, 0)].re - 1.0 / 1.01).abs() < 1e-15);
        let u = MeasurementMatrix::scaled_unitary(6, &mut seeded(2)).unwrap();
        let gram = u.a.adjoint() * &u.a;
        assert!((gram - CMat::identity(6, 6).scale(1.0 / (1.01 * 1.01))).norm() < 1e-12);
    }

    #[test]
    fn encode_examples() {
        let a = make_measurement_matrix(5, 9, &mut seeded(3)).unwrap();
        assert!(encode(&SparseUpdate::zeros(9), &a).unwrap().iter().all(|z| *z == ZERO));
        let basis = SparseUpdate {
            half_len: 9,
            support: vec![4],
            values: vec![c(1.0, 0.0)],
        };
        assert_eq!(encode(&basis, &a).unwrap(), a.a.column(4).into_owned());
        assert!(encode(&SparseUpdate::zeros(8), &a).is_err());
    }

    proptest! {
        #[test]
        fn split_roundtrip(v in prop::collection::vec(-1e3f64..1e3, 0..64)) {
            let mut v = v;
            if v.len() % 2 == 1 { v.pop(); }
            let p = split(&v);
            prop_assert_eq!(unsplit(p.x.as_slice()), v);
        }

        #[test]
        fn error_feedback_is_conserved(
            x in prop::collection::vec((-10f64..10.0, -10f64..10.0), 1..40),
            r in prop::collection::vec((-1f64..1.0, -1f64..1.0), 40),
            s in 1usize..50,
        ) {
            let n = x.len();
            let full = packed(&x.iter().map(|&(a, b)| c(a, b)).collect::<Vec<_>>());
            let res = ClientResidual { r: CVec::from_iterator(n, r.iter().take(n).map(|&(a, b)| c(a, b))) };
            let (sp, new_r) = sparsify(&full, &res, s).unwrap();
            prop_assert!(sp.support.len() <= s);
            prop_assert!(sp.support.windows(2).all(|w| w[0] < w[1]));
            // every entry is either moved to the sparse part or kept in the residual, bit for bit
            prop_assert_eq!(sp.densify() + &new_r.r, &full.x + &res.r);
        }

        #[test]
        fn sparsify_is_idempotent_on_sparse_input(
            vals in prop::collection::vec((0.1f64..10.0, -10f64..10.0), 1..8),
            pad in 0usize..20,
        ) {
            let mut dense: Vec<Complex64> = vals.iter().map(|&(a, b)| c(a, b)).collect();
            dense.extend(std::iter::repeat_n(ZERO, pad));
            let s = vals.len();
            let full = packed(&dense);
            let (sp, r) = sparsify(&full, &ClientResidual::zeros(dense.len()), s).unwrap();
            prop_assert_eq!(sp.densify(), full.x);
            prop_assert!(r.r.iter().all(|z| *z == ZERO));
        }
    }
}
