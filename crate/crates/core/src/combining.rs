//! Receive combining at the base station.
//!
//! With individual channel estimates the received block is projected through
//! the pseudo-inverse of `Ĝ` (the BLUE, equivalently zero-forcing), which
//! separates the clients. With only the sum-channel estimate the block is
//! matched-filtered by `ĥ_sum` and scaled by `c = K / (M √(ηρ) γ̄)`.

use num_complex::Complex64;

use crate::airlink::PowerAllocation;
use crate::estimation::SumEstimate;
use crate::{CMat, CVec, Error, Result};

/// Largest accepted condition number of `Ĝ^H Ĝ`.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Per-client estimates `x̂_k`; `None` for clients that did not transmit.
#[derive(Clone, Debug)]
pub struct CombinedPerClient {
    pub x_hats: Vec<Option<CVec>>,
}

#[derive(Clone, Debug)]
pub struct CombinedSum {
    pub x_hat: CVec,
    pub c: f64,
}

/// `x̂_k = (1/√(η_k ρ)) ([Ĝ (Ĝ^H Ĝ)^{-1}]_k)^H Y`, as a length-`T` vector.
///
/// The solve goes through a QR factorization `Ĝ = QR`, so that
/// `(Ĝ^H Ĝ)^{-1} Ĝ^H Y = R^{-1} Q^H Y` without forming the Gram matrix.
pub fn blue_combine(y: &CMat, g_hat: &CMat, alloc: &PowerAllocation, rho: f64) -> Result<CombinedPerClient> {
    let (m, k) = g_hat.shape();
    if y.nrows() != m {
        return Err(Error::dims("received block rows", m, y.nrows()));
    }
    if alloc.etas.len() != k {
        return Err(Error::dims("power allocation length", k, alloc.etas.len()));
    }
    if m < k {
        return Err(Error::invalid(format!("zero-forcing needs M >= K, got M={m}, K={k}")));
    }
    let sv = g_hat.clone().svd(false, false).singular_values;
    let (smax, smin) = sv
        .iter()
        .fold((0.0_f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::CombiningFailure {
            condition,
            limit: MAX_GRAM_CONDITION,
        });
    }
    let qr = g_hat.clone().qr();
    let rhs = qr.q().adjoint() * y;
    let z = qr.r().solve_upper_triangular(&rhs).ok_or(Error::CombiningFailure {
        condition,
        limit: MAX_GRAM_CONDITION,
    })?;
    let x_hats = (0..k)
        .map(|i| {
            let eta = alloc.etas[i];
            (eta > 0.0).then(|| z.row(i).transpose().unscale((eta * rho).sqrt()))
        })
        .collect();
    Ok(CombinedPerClient { x_hats })
}

/// `x̂ = c (ĥ_sum^H Y)^T` with `c = K / (M √(ηρ) γ̄)`.
pub fn sum_combine(y: &CMat, est: &SumEstimate, eta: f64, rho: f64, clients: usize) -> Result<CombinedSum> {
    let m = y.nrows();
    if est.h_hat_sum.len() != m {
        return Err(Error::dims("sum estimate length", m, est.h_hat_sum.len()));
    }
    if !(eta > 0.0) || !(rho > 0.0) {
        return Err(Error::NoTransmission);
    }
    if !(est.gamma_bar > 0.0) {
        return Err(Error::invalid("sum-channel quality must be positive"));
    }
    let c = clients as f64 / (m as f64 * (eta * rho).sqrt() * est.gamma_bar);
    let x_hat = (y.transpose() * est.h_hat_sum.conjugate()) * Complex64::new(c, 0.0);
    Ok(CombinedSum { x_hat, c })
}

/// `Σ_k w_k Δθ_k`, bypassing the channel entirely.
pub fn genie_aggregate(updates: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if updates.len() != weights.len() {
        return Err(Error::dims("weight count", updates.len(), weights.len()));
    }
    let d = updates.first().map_or(0, Vec::len);
    let mut out = vec![0.0; d];
    for (u, &w) in updates.iter().zip(weights) {
        if u.len() != d {
            return Err(Error::dims("update length", d, u.len()));
        }
        for (o, v) in out.iter_mut().zip(u) {
            *o += w * v;
        }
    }
    Ok(out)
}
