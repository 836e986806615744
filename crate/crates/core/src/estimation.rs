//! MMSE channel estimation for both pilot schemes.
//!
//! With orthogonal pilots the despread observation of client `k` is
//! `Y_p φ_k = √(ρτ_p) g_k + n`, and the MMSE estimate shrinks it by
//! `√(ρτ_p) β_k / (1 + ρτ_p β_k)`. Its per-antenna mean square is
//! `γ_k = ρτ_p β_k² / (1 + ρτ_p β_k)`.
//!
//! With a common pilot the observation is `√(ρτ_p β_min) h_sum + n` where
//! `h_sum = Σ_k h_k` has per-antenna variance `K`, so the shrinkage becomes
//! `√(ρτ_p β_min) K / (1 + ρτ_p β_min K)` and the quality
//! `γ̄ = ρτ_p β_min K² / (1 + ρτ_p β_min K)`.

use num_complex::Complex64;

use crate::channel::{FadingProfile, PilotSet};
use crate::{CMat, CVec, Error, Result};

/// Individual channel estimates `Ĝ = [ĝ_1, ..., ĝ_K]` and their qualities.
#[derive(Clone, Debug)]
pub struct PerClientEstimate {
    pub g_hat: CMat,
    pub gammas: Vec<f64>,
}

/// Estimate of the normalized sum channel and its quality `γ̄`.
#[derive(Clone, Debug)]
pub struct SumEstimate {
    pub h_hat_sum: CVec,
    pub gamma_bar: f64,
}

/// `γ_k = ρτ_p β_k² / (1 + ρτ_p β_k)`.
pub fn gamma(rho: f64, tau_p: usize, beta: f64) -> f64 {
    let snr = rho * tau_p as f64;
    snr * beta * beta / (1.0 + snr * beta)
}

/// `γ̄ = ρτ_p β_min K² / (1 + ρτ_p β_min K)`.
pub fn gamma_bar(rho: f64, tau_p: usize, beta_min: f64, clients: usize) -> f64 {
    let snr = rho * tau_p as f64 * beta_min;
    let k = clients as f64;
    snr * k * k / (1.0 + snr * k)
}

pub fn estimate_per_client(
    y_p: &CMat,
    pilots: &PilotSet,
    rho: f64,
    profile: &FadingProfile,
) -> Result<PerClientEstimate> {
    if y_p.ncols() != pilots.len() {
        return Err(Error::dims("pilot observation columns", pilots.len(), y_p.ncols()));
    }
    if profile.len() != pilots.clients() {
        return Err(Error::dims("fading profile length", pilots.clients(), profile.len()));
    }
    let tau_p = pilots.len();
    let snr = rho * tau_p as f64;
    let despread = y_p * &pilots.phi;
    let mut g_hat = despread;
    let mut gammas = Vec::with_capacity(profile.len());
    for (k, mut col) in g_hat.column_iter_mut().enumerate() {
        let beta = profile.beta(k);
        col.scale_mut(snr.sqrt() * beta / (1.0 + snr * beta));
        gammas.push(gamma(rho, tau_p, beta));
    }
    Ok(PerClientEstimate { g_hat, gammas })
}

pub fn estimate_sum(
    y_p: &CMat,
    phi: &CVec,
    rho: f64,
    profile: &FadingProfile,
    clients: usize,
) -> Result<SumEstimate> {
    if y_p.ncols() != phi.len() {
        return Err(Error::dims("pilot observation columns", phi.len(), y_p.ncols()));
    }
    let tau_p = phi.len();
    let snr = rho * tau_p as f64 * profile.beta_min();
    let k = clients as f64;
    let scale = snr.sqrt() * k / (1.0 + snr * k);
    let h_hat_sum = (y_p * phi) * Complex64::new(scale, 0.0);
    Ok(SumEstimate {
        h_hat_sum,
        gamma_bar: gamma_bar(rho, tau_p, profile.beta_min(), clients),
    })
}

/// Per-antenna MSE of `Σ_k ĝ_k` as an estimate of `Σ_k g_k`: `Σ_k (β_k − γ_k)`.
pub fn mse_sum_from_orthogonal(profile: &FadingProfile, rho: f64, tau_p: usize) -> f64 {
    profile.betas().iter().map(|&b| b - gamma(rho, tau_p, b)).sum()
}

/// Per-antenna MSE of `ĥ_sum` as an estimate of `h_sum`: `K − γ̄`.
///
/// With equal coefficients `β = 1` this is `K/(1 + ρτ_p K)`.
pub fn mse_sum_common_pilot(profile: &FadingProfile, rho: f64, tau_p: usize) -> f64 {
    let k = profile.len();
    k as f64 - gamma_bar(rho, tau_p, profile.beta_min(), k)
}
