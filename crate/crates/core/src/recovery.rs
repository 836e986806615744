//! Sparse recovery of `min ‖A x − y‖² s.t. ‖x‖₀ ≤ budget`.
//!
//! Matching pursuit provides a warm start; iterative hard thresholding with
//! unit step then refines it. The unit step is valid because every
//! [`MeasurementMatrix`] has `‖A‖₂ < 1`, which also makes the objective
//! non-increasing from one iteration to the next.

use num_complex::Complex64;
use rand::Rng;

use crate::coding::{make_measurement_matrix, top_s_indices, MeasurementMatrix};
use crate::linalg::{adjoint_mul, complex_gaussian, mul_dense_skip_zeros, norm_sqr};
use crate::{CVec, Error, Result};

/// Relative change of `x` below which IHT stops.
pub const IHT_TOLERANCE: f64 = 1e-6;
pub const IHT_MAX_ITERATIONS: usize = 500;
/// Residual norm at which matching pursuit stops early.
pub const MP_RESIDUAL_FLOOR: f64 = 1e-10;
/// Matching pursuit may revisit atoms; it takes at most this many steps per
/// atom of budget.
pub const MP_STEPS_PER_ATOM: usize = 10;

#[derive(Clone, Copy, Debug)]
pub struct RecoveryProblem<'a> {
    pub a: &'a MeasurementMatrix,
    pub y: &'a CVec,
    pub budget: usize,
}

impl<'a> RecoveryProblem<'a> {
    pub fn new(a: &'a MeasurementMatrix, y: &'a CVec, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::invalid("sparsity budget must be at least 1"));
        }
        if y.len() != a.samples() {
            return Err(Error::dims("observation length", a.samples(), y.len()));
        }
        Ok(Self { a, y, budget })
    }

    pub fn objective(&self, x: &CVec) -> f64 {
        norm_sqr(&(mul_dense_skip_zeros(&self.a.a, x) - self.y))
    }
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub x: CVec,
    /// `‖A x − y‖²` at the returned point.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the warm start followed by the value after every iteration.
    pub objective_trace: Vec<f64>,
}

impl RecoveryResult {
    pub fn support(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&i| self.x[i] != Complex64::new(0.0, 0.0)).collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
    }
}

/// Matching pursuit with coefficient accumulation. Each step takes the atom
/// whose projection removes the most residual energy, `|⟨a_j, r⟩|² / ‖a_j‖²`,
/// so unequal column norms are handled. Stops once `budget` distinct atoms
/// have been selected or the residual vanishes.
pub fn matching_pursuit_warm_start(prob: &RecoveryProblem<'_>) -> CVec {
    let a = &prob.a.a;
    let n = a.ncols();
    let col_norms: Vec<f64> = a.column_iter().map(|c| c.norm_squared()).collect();
    let mut x = CVec::zeros(n);
    let mut selected = vec![false; n];
    let mut distinct = 0;
    let mut residual = prob.y.clone();
    for _ in 0..prob.budget.saturating_mul(MP_STEPS_PER_ATOM) {
        if distinct >= prob.budget || residual.norm() < MP_RESIDUAL_FLOOR {
            break;
        }
        let corr = adjoint_mul(a, &residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in corr.iter().enumerate() {
            if col_norms[j] == 0.0 {
                continue;
            }
            let m = c.norm_sqr() / col_norms[j];
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((j, m));
            }
        }
        let Some((j, _)) = best else { break };
        let coef = corr[j] / col_norms[j];
        x[j] += coef;
        residual.axpy(-coef, &a.column(j), Complex64::new(1.0, 0.0));
        if !selected[j] {
            selected[j] = true;
            distinct += 1;
        }
    }
    x
}

fn hard_threshold(v: &mut CVec, budget: usize) {
    let keep = top_s_indices(v.as_slice(), budget);
    let mut mask = vec![false; v.len()];
    for i in keep {
        mask[i] = true;
    }
    for (z, keep) in v.iter_mut().zip(mask) {
        if !keep {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}

/// Iterates `x ← H(x + A^H (y − A x))` from `warm_start`.
pub fn iht_solve(prob: &RecoveryProblem<'_>, warm_start: &CVec) -> Result<RecoveryResult> {
    let a = &prob.a.a;
    if warm_start.len() != a.ncols() {
        return Err(Error::dims("warm start length", a.ncols(), warm_start.len()));
    }
    let mut x = warm_start.clone();
    hard_threshold(&mut x, prob.budget);
    let mut residual = prob.y - mul_dense_skip_zeros(a, &x);
    let mut trace = vec![norm_sqr(&residual)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < IHT_MAX_ITERATIONS {
        let mut next = &x + adjoint_mul(a, &residual);
        hard_threshold(&mut next, prob.budget);
        iterations += 1;
        let change = (&next - &x).norm();
        let scale = next.norm();
        x = next;
        residual = prob.y - mul_dense_skip_zeros(a, &x);
        trace.push(norm_sqr(&residual));
        if change <= IHT_TOLERANCE * scale || scale == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(RecoveryResult {
        objective: *trace.last().unwrap(),
        x,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Matching-pursuit warm start followed by IHT.
pub fn recover(prob: &RecoveryProblem<'_>) -> Result<RecoveryResult> {
    let warm = matching_pursuit_warm_start(prob);
    iht_solve(prob, &warm)
}

/// Fraction of random `s`-sparse signals whose support is recovered exactly
/// from `samples` noisy measurements. Each trial draws a fresh signal (CN(0,1)
/// values on a uniform support), a fresh measurement matrix and CN(0,
/// `noise_level²`) measurement noise.
pub fn recovery_rate_experiment<R: Rng + ?Sized>(
    samples: usize,
    half_len: usize,
    s: usize,
    trials: usize,
    noise_level: f64,
    rng: &mut R,
) -> Result<f64> {
    if s == 0 || s > half_len {
        return Err(Error::invalid(format!("sparsity {s} outside 1..={half_len}")));
    }
    if trials == 0 {
        return Ok(0.0);
    }
    let mut hits = 0;
    for _ in 0..trials {
        let mut support = rand::seq::index::sample(rng, half_len, s).into_vec();
        support.sort_unstable();
        let mut truth = CVec::zeros(half_len);
        for &i in &support {
            truth[i] = complex_gaussian(rng, 1.0);
        }
        let a = make_measurement_matrix(samples, half_len, rng)?;
        let mut y = mul_dense_skip_zeros(&a.a, &truth);
        if noise_level > 0.0 {
            for z in y.iter_mut() {
                *z += complex_gaussian(rng, noise_level * noise_level);
            }
        }
        let prob = RecoveryProblem::new(&a, &y, s)?;
        if recover(&prob)?.support() == support {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}
