mod common;

use num_complex::Complex64;
use otafl::channel::{generate_channel, make_orthogonal_pilots, pilot_rx_orthogonal, pilot_rx_sum, FadingProfile};
use otafl::estimation::{estimate_per_client, estimate_sum, mse_sum_common_pilot, mse_sum_from_orthogonal};
use otafl::rng::seeded;

use common::{mmse_error, mmse_power};

#[test]
fn unequal_coefficients_match_closed_form() {
    let (m, tau, rho) = (8, 4, 10.0);
    let profile = FadingProfile::from_db(&[-20.0, -10.0, -3.0, 0.0]).unwrap();
    let pilots = make_orthogonal_pilots(tau, 4).unwrap();
    let mut rng = seeded(11);
    let trials = 10_000;
    let mut err = [0.0; 4];
    let mut power = [0.0; 4];
    for _ in 0..trials {
        let ch = generate_channel(m, 4, &profile, &mut rng).unwrap();
        let y = pilot_rx_orthogonal(&ch, &pilots, rho, Some(&mut rng)).unwrap();
        let est = estimate_per_client(&y, &pilots, rho, &profile).unwrap();
        for k in 0..4 {
            err[k] += (est.g_hat.column(k) - ch.g.column(k)).norm_squared();
            power[k] += est.g_hat.column(k).norm_squared();
        }
    }
    let snr = rho * tau as f64;
    for k in 0..4 {
        let n = (trials * m) as f64;
        let b = profile.beta(k);
        assert!((err[k] / n - mmse_error(snr, b)).abs() / mmse_error(snr, b) < 0.03, "client {k}");
        assert!((power[k] / n - mmse_power(snr, b)).abs() / mmse_power(snr, b) < 0.03, "client {k}");
    }
}

#[test]
fn orthogonality_principle() {
    // the MMSE error is uncorrelated with the estimate
    let (m, tau, rho) = (8, 4, 5.0);
    let profile = FadingProfile::from_db(&[-6.0, 0.0]).unwrap();
    let pilots = make_orthogonal_pilots(tau, 2).unwrap();
    let mut rng = seeded(12);
    let trials = 10_000;
    let mut cross = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for _ in 0..trials {
        let ch = generate_channel(m, 2, &profile, &mut rng).unwrap();
        let y = pilot_rx_orthogonal(&ch, &pilots, rho, Some(&mut rng)).unwrap();
        let est = estimate_per_client(&y, &pilots, rho, &profile).unwrap();
        let e = &ch.g - &est.g_hat;
        cross += est.g_hat.column(0).dotc(&e.column(0));
        scale += est.g_hat.column(0).norm() * e.column(0).norm();
    }
    assert!(cross.norm() / scale < 0.02, "{}", cross.norm() / scale);
}

#[test]
fn summed_individual_estimates_match_closed_form() {
    // K=4, β=1, ρτ_p=40: Σ_k (β − γ) = 4/41
    let profile = FadingProfile::uniform(4, 1.0).unwrap();
    let closed = mse_sum_from_orthogonal(&profile, 10.0, 4);
    assert!((closed - 4.0 / 41.0).abs() < 1e-12);
    let pilots = make_orthogonal_pilots(4, 4).unwrap();
    let mut rng = seeded(13);
    let (m, trials) = (16, 10_000);
    let mut acc = 0.0;
    for _ in 0..trials {
        let ch = generate_channel(m, 4, &profile, &mut rng).unwrap();
        let y = pilot_rx_orthogonal(&ch, &pilots, 10.0, Some(&mut rng)).unwrap();
        let est = estimate_per_client(&y, &pilots, 10.0, &profile).unwrap();
        acc += (est.g_hat.column_sum() - ch.g.column_sum()).norm_squared();
    }
    let mc = acc / (trials * m) as f64;
    assert!((mc - closed).abs() / closed < 0.03, "{mc} vs {closed}");
}

#[test]
fn common_pilot_with_unequal_coefficients() {
    // the target is the sum of normalized channels, CN(0, K) per antenna
    let (m, tau, rho) = (8, 3, 4.0);
    let profile = FadingProfile::from_db(&[-10.0, -4.0, 0.0, 0.0]).unwrap();
    let phi = make_orthogonal_pilots(tau, 1).unwrap().column(0);
    let mut rng = seeded(14);
    let trials = 10_000;
    let mut acc = 0.0;
    for _ in 0..trials {
        let ch = generate_channel(m, 4, &profile, &mut rng).unwrap();
        let target = (0..4).fold(otafl::CVec::zeros(m), |a, k| a + ch.normalized(k, &profile));
        let y = pilot_rx_sum(&ch, &phi, rho, &profile, Some(&mut rng)).unwrap();
        let est = estimate_sum(&y, &phi, rho, &profile, 4).unwrap();
        acc += (est.h_hat_sum - target).norm_squared();
    }
    let mc = acc / (trials * m) as f64;
    let snr = rho * tau as f64 * profile.beta_min();
    let oracle = mmse_error(snr, 4.0);
    assert!((mc - oracle).abs() / oracle < 0.03, "{mc} vs {oracle}");
    assert!((mse_sum_common_pilot(&profile, rho, tau) - oracle).abs() < 1e-12);
}
