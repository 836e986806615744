//! Uplink data transmission and power control.

use num_complex::Complex64;

use crate::channel::{ChannelRealization, FadingProfile};
use crate::linalg::{complex_gaussian, norm_sqr};
use crate::rng::SimRng;
use crate::{CMat, CVec, Error, Result};

/// Power-control coefficients `η_k`, chosen so that `‖√η_k x_k‖² ≤ T`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation {
    pub etas: Vec<f64>,
}

impl PowerAllocation {
    pub fn is_silent(&self, k: usize) -> bool {
        self.etas[k] == 0.0
    }
}

/// Every client transmits at full power, `η_k = T / ‖x_k‖²`. A zero vector
/// leaves its client silent.
pub fn power_full(xs: &[CVec], samples: usize) -> PowerAllocation {
    let etas = xs
        .iter()
        .map(|x| {
            let e = norm_sqr(x);
            if e > 0.0 {
                samples as f64 / e
            } else {
                0.0
            }
        })
        .collect();
    PowerAllocation { etas }
}

/// Coordinated power control for over-the-air summation:
/// `η_k = η w_k² / β_k` with `η = T / max_k (w_k² ‖x_k‖² / β_k)`.
///
/// Returns the allocation and the common factor `η`.
pub fn power_sum(xs: &[CVec], weights: &[f64], profile: &FadingProfile, samples: usize) -> Result<(PowerAllocation, f64)> {
    if xs.len() != weights.len() {
        return Err(Error::dims("weight count", xs.len(), weights.len()));
    }
    if xs.len() != profile.len() {
        return Err(Error::dims("fading profile length", xs.len(), profile.len()));
    }
    profile.require_positive()?;
    let worst = xs
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(k, (x, w))| w * w / profile.beta(k) * norm_sqr(x))
        .fold(0.0_f64, f64::max);
    if worst <= 0.0 {
        return Err(Error::NoTransmission);
    }
    let eta = samples as f64 / worst;
    let etas = weights
        .iter()
        .enumerate()
        .map(|(k, w)| eta * w * w / profile.beta(k))
        .collect();
    Ok((PowerAllocation { etas }, eta))
}

/// `Y = Σ_k √(ρ η_k) g_k x_k^T + N` (`M × T`). Passing `None` for `noise`
/// suppresses `N`.
pub fn transmit(
    xs: &[CVec],
    alloc: &PowerAllocation,
    channel: &ChannelRealization,
    rho: f64,
    noise: Option<&mut SimRng>,
) -> Result<CMat> {
    let k = channel.clients();
    if xs.len() != k {
        return Err(Error::dims("transmitted vector count", k, xs.len()));
    }
    if alloc.etas.len() != k {
        return Err(Error::dims("power allocation length", k, alloc.etas.len()));
    }
    let samples = xs.first().map_or(0, |x| x.len());
    if let Some(x) = xs.iter().find(|x| x.len() != samples) {
        return Err(Error::dims("transmitted vector length", samples, x.len()));
    }
    let mut y = CMat::zeros(channel.antennas(), samples);
    for (i, x) in xs.iter().enumerate() {
        let amp = (rho * alloc.etas[i]).sqrt();
        if amp == 0.0 {
            continue;
        }
        let g = channel.g.column(i).scale(amp);
        y.ger(Complex64::new(1.0, 0.0), &g, x, Complex64::new(1.0, 0.0));
    }
    if let Some(rng) = noise {
        for z in y.iter_mut() {
            *z += complex_gaussian(rng, 1.0);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_channel;
    use crate::linalg::gaussian_vector;
    use crate::rng::seeded;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn full_power_examples() {
        let t = 4;
        let unit = CVec::from_element(t, c(1.0));
        let big = CVec::from_element(t, c(2.0));
        let zero = CVec::zeros(t);
        let alloc = power_full(&[unit, big, zero], t);
        assert_eq!(alloc.etas[0], 1.0);
        assert_eq!(alloc.etas[1], 0.25);
        assert_eq!(alloc.etas[2], 0.0);
        assert!(alloc.is_silent(2));
    }

    #[test]
    fn full_power_hits_constraint() {
        let mut rng = seeded(1);
        let xs: Vec<CVec> = (0..5).map(|_| gaussian_vector(7, 3.0, &mut rng)).collect();
        let alloc = power_full(&xs, 7);
        for (x, eta) in xs.iter().zip(&alloc.etas) {
            assert!((eta * norm_sqr(x) - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_power_single_client_is_full_power() {
        let x = gaussian_vector(6, 1.0, &mut seeded(2));
        let profile = FadingProfile::uniform(1, 1.0).unwrap();
        let (alloc, eta) = power_sum(std::slice::from_ref(&x), &[1.0], &profile, 6).unwrap();
        assert_eq!(alloc, power_full(&[x], 6));
        assert_eq!(eta, alloc.etas[0]);
    }

    #[test]
    fn sum_power_weaker_channel_gets_more_power() {
        let x = CVec::from_element(3, c(1.0));
        let profile = FadingProfile::new(vec![4.0, 1.0]).unwrap();
        let (alloc, _) = power_sum(&[x.clone(), x], &[0.5, 0.5], &profile, 3).unwrap();
        assert!((alloc.etas[1] / alloc.etas[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sum_power_equalizes_received_gain() {
        let mut rng = seeded(3);
        let xs: Vec<CVec> = (0..4).map(|i| gaussian_vector(5, 1.0 + i as f64, &mut rng)).collect();
        let profile = FadingProfile::new(vec![1.0, 0.1, 0.01, 0.5]).unwrap();
        let w = [0.1, 0.2, 0.3, 0.4];
        let (alloc, eta) = power_sum(&xs, &w, &profile, 5).unwrap();
        let peak = xs
            .iter()
            .zip(&alloc.etas)
            .map(|(x, e)| e * norm_sqr(x))
            .fold(0.0, f64::max);
        assert!((peak - 5.0).abs() < 1e-12);
        for k in 0..4 {
            let gain = alloc.etas[k] * profile.beta(k) / (w[k] * w[k]);
            assert!((gain - eta).abs() <= 1e-12 * eta);
            assert!(alloc.etas[k] * norm_sqr(&xs[k]) <= 5.0 + 1e-9);
        }
    }

    #[test]
    fn sum_power_all_silent_is_error() {
        let profile = FadingProfile::uniform(2, 1.0).unwrap();
        let xs = vec![CVec::zeros(3), CVec::zeros(3)];
        assert!(matches!(power_sum(&xs, &[0.5, 0.5], &profile, 3), Err(Error::NoTransmission)));
    }

    #[test]
    fn noiseless_scalar_channel() {
        let ch = ChannelRealization {
            g: CMat::from_element(1, 1, c(1.0)),
        };
        let x = CVec::from_column_slice(&[c(1.0), Complex64::new(0.0, 2.0), c(-3.0)]);
        let y = transmit(
            std::slice::from_ref(&x),
            &PowerAllocation { etas: vec![1.0] },
            &ch,
            1.0,
            None,
        )
        .unwrap();
        assert_eq!(y.row(0).transpose(), x);
    }

    #[test]
    fn zero_snr_leaves_only_noise() {
        let profile = FadingProfile::uniform(2, 1.0).unwrap();
        let ch = generate_channel(3, 2, &profile, &mut seeded(4)).unwrap();
        let xs = vec![CVec::from_element(4, c(1.0)); 2];
        let alloc = PowerAllocation { etas: vec![1.0, 1.0] };
        let quiet = transmit(&xs, &alloc, &ch, 0.0, None).unwrap();
        assert_eq!(quiet.norm(), 0.0);
        let noisy = transmit(&xs, &alloc, &ch, 0.0, Some(&mut seeded(5))).unwrap();
        let pure = transmit(&[CVec::zeros(4), CVec::zeros(4)], &alloc, &ch, 1.0, Some(&mut seeded(5))).unwrap();
        assert_eq!(noisy, pure);
    }

    #[test]
    fn transmit_is_linear() {
        let mut rng = seeded(6);
        let profile = FadingProfile::new(vec![1.0, 0.3]).unwrap();
        let ch = generate_channel(4, 2, &profile, &mut rng).unwrap();
        let alloc = PowerAllocation { etas: vec![0.7, 2.0] };
        let a: Vec<CVec> = (0..2).map(|_| gaussian_vector(5, 1.0, &mut rng)).collect();
        let b: Vec<CVec> = (0..2).map(|_| gaussian_vector(5, 1.0, &mut rng)).collect();
        let sum: Vec<CVec> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let ya = transmit(&a, &alloc, &ch, 3.0, None).unwrap();
        let yb = transmit(&b, &alloc, &ch, 3.0, None).unwrap();
        let ys = transmit(&sum, &alloc, &ch, 3.0, None).unwrap();
        assert!((ys - ya - yb).norm() < 1e-12);
    }
}
