//! Fast self-checks of the numerical building blocks, run by the `validate`
//! subcommand. Each check is a scaled-down version of a property the unit and
//! integration suites test in full.

use rand::Rng;

use crate::airlink::{power_full, transmit};
use crate::channel::{generate_channel, make_orthogonal_pilots, pilot_rx_orthogonal, FadingProfile};
use crate::coding::{make_measurement_matrix, sparsify, split, unsplit_to_len, ClientResidual};
use crate::combining::blue_combine;
use crate::estimation::{estimate_per_client, gamma};
use crate::learning::{Dataset, Model};
use crate::linalg::gaussian_vector;
use crate::recovery::{recover, recovery_rate_experiment, RecoveryProblem};
use crate::rng::seeded;
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(u64) -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 6] = [
    ("split/unsplit roundtrip", check_split),
    ("error-feedback conservation", check_error_feedback),
    ("per-client estimation MSE", check_estimation_mse),
    ("noiseless zero-forcing exactness", check_zero_forcing),
    ("sparse recovery rate", check_recovery),
    ("MLP gradient vs finite differences", check_gradient),
];

/// Runs every check with the given seed.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let (passed, detail) = check(seed).unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckReport { name, passed, detail }
        })
        .collect()
}

fn check_split(seed: u64) -> Result<(bool, String)> {
    let mut rng = seeded(seed);
    let mut worst = 0usize;
    for len in [1usize, 2, 7, 64, 101] {
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        if unsplit_to_len(split(&v).x.as_slice(), len) != v {
            worst = worst.max(len);
        }
    }
    Ok((worst == 0, "5 lengths, bitwise equality".into()))
}

fn check_error_feedback(seed: u64) -> Result<(bool, String)> {
    let mut rng = seeded(seed);
    let mut residual = ClientResidual::zeros(50);
    let mut err = 0.0f64;
    for _ in 0..20 {
        let v: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let packed = split(&v);
        let carrier = &packed.x + &residual.r;
        let (sparse, next) = sparsify(&packed, &residual, 5)?;
        let back = sparse.densify() + &next.r;
        err = err.max((back - carrier).camax());
        residual = next;
    }
    Ok((err == 0.0, format!("max deviation {err:e} over 20 rounds")))
}

fn check_estimation_mse(seed: u64) -> Result<(bool, String)> {
    let (m, k, tau, rho) = (8, 4, 4, 10.0);
    let profile = FadingProfile::uniform(k, 1.0)?;
    let pilots = make_orthogonal_pilots(tau, k)?;
    let mut rng = seeded(seed);
    let trials = 2000;
    let mut mse = 0.0;
    for _ in 0..trials {
        let ch = generate_channel(m, k, &profile, &mut rng)?;
        let y = pilot_rx_orthogonal(&ch, &pilots, rho, Some(&mut rng))?;
        let est = estimate_per_client(&y, &pilots, rho, &profile)?;
        mse += (&est.g_hat - &ch.g).norm_squared();
    }
    mse /= (trials * m * k) as f64;
    let want = 1.0 - gamma(rho, tau, 1.0);
    let rel = (mse - want).abs() / want;
    Ok((rel < 0.05, format!("MSE {mse:.5} vs {want:.5} (rel {rel:.3}, tol 0.05)")))
}

fn check_zero_forcing(seed: u64) -> Result<(bool, String)> {
    let (m, k, t) = (8, 4, 6);
    let profile = FadingProfile::from_db(&[-20.0, -10.0, -5.0, 0.0])?;
    let mut rng = seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let ch = generate_channel(m, k, &profile, &mut rng)?;
        let xs: Vec<_> = (0..k).map(|_| gaussian_vector(t, 1.0, &mut rng)).collect();
        let alloc = power_full(&xs, t);
        let y = transmit(&xs, &alloc, &ch, 100.0, None)?;
        let out = blue_combine(&y, &ch.g, &alloc, 100.0)?;
        for (x, x_hat) in xs.iter().zip(&out.x_hats) {
            let x_hat = x_hat.as_ref().expect("every client transmits");
            worst = worst.max((x_hat - x).norm() / x.norm());
        }
    }
    Ok((worst < 1e-8, format!("worst relative error {worst:e} (tol 1e-8)")))
}

fn check_recovery(seed: u64) -> Result<(bool, String)> {
    let mut rng = seeded(seed);
    let rate = recovery_rate_experiment(40, 128, 4, 40, 0.0, &mut rng)?;
    // one noisy instance must still yield a monotone objective trace
    let a = make_measurement_matrix(40, 128, &mut rng)?;
    let y = gaussian_vector(40, 1.0, &mut rng);
    let monotone = recover(&RecoveryProblem::new(&a, &y, 4)?)?.is_monotone();
    Ok((
        rate >= 0.9 && monotone,
        format!("exact-support rate {rate:.3} (tol 0.9), monotone objective {monotone}"),
    ))
}

fn check_gradient(seed: u64) -> Result<(bool, String)> {
    let mut rng = seeded(seed);
    let model = Model::mlp(3)?;
    let theta = model.init(&mut rng);
    let data = Dataset::synthetic(&[0, 1, 2], 2, &mut rng);
    let idx: Vec<usize> = (0..data.len()).collect();
    let (_, grad) = model.loss_and_grad(&theta, &data, &idx)?;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let i = rng.random_range(0..theta.len());
        let mut plus = theta.clone();
        plus[i] += h;
        let mut minus = theta.clone();
        minus[i] -= h;
        let fd = (model.loss_and_grad(&plus, &data, &idx)?.0 - model.loss_and_grad(&minus, &data, &idx)?.0) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8));
    }
    Ok((worst < 1e-4, format!("worst relative error {worst:e} at 10 coordinates (tol 1e-4)")))
}
