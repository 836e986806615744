mod common;

use otafl::coding::{make_measurement_matrix, MeasurementMatrix};
use otafl::linalg::{complex_gaussian, gaussian_vector, mul_dense_skip_zeros};
use otafl::recovery::{matching_pursuit_warm_start, recover, recovery_rate_experiment, RecoveryProblem};
use otafl::rng::seeded;
use otafl::CVec;
use proptest::prelude::*;

use common::brute_force_sparse_ls;

#[test]
fn orthonormal_dictionary_recovers_two_sparse_exactly() {
    let mut rng = seeded(31);
    for _ in 0..20 {
        let a = MeasurementMatrix::scaled_unitary(16, &mut rng).unwrap();
        let mut truth = CVec::zeros(16);
        let support = rand::seq::index::sample(&mut rng, 16, 2).into_vec();
        for &i in &support {
            truth[i] = complex_gaussian(&mut rng, 1.0);
        }
        let y = mul_dense_skip_zeros(&a.a, &truth);
        let res = recover(&RecoveryProblem::new(&a, &y, 2).unwrap()).unwrap();
        assert!((res.x - &truth).norm() <= 1e-6 * truth.norm());
    }
}

#[test]
fn noiseless_single_atom_matches_brute_force() {
    let mut rng = seeded(32);
    for _ in 0..100 {
        let a = make_measurement_matrix(4, 8, &mut rng).unwrap();
        let mut x = CVec::zeros(8);
        x[rand::Rng::random_range(&mut rng, 0..8)] = complex_gaussian(&mut rng, 1.0);
        let y = mul_dense_skip_zeros(&a.a, &x);
        let res = recover(&RecoveryProblem::new(&a, &y, 1).unwrap()).unwrap();
        let (best, _) = brute_force_sparse_ls(&a.a, &y, 1);
        assert!((res.objective - best).abs() <= 1e-8);
    }
}

#[test]
fn more_nonzeros_than_samples_fails() {
    let rate = recovery_rate_experiment(8, 64, 12, 30, 0.0, &mut seeded(33)).unwrap();
    assert!(rate <= 0.05, "{rate}");
}

#[test]
fn recovery_degrades_gracefully_with_noise() {
    let clean = recovery_rate_experiment(40, 128, 4, 40, 0.0, &mut seeded(34)).unwrap();
    let noisy = recovery_rate_experiment(40, 128, 4, 40, 1.0, &mut seeded(34)).unwrap();
    assert!(clean >= 0.95 && noisy <= clean, "{clean} {noisy}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn refinement_never_hurts_the_warm_start(seed in any::<u64>(), s in 1usize..4) {
        let mut rng = seeded(seed);
        let a = make_measurement_matrix(10, 24, &mut rng).unwrap();
        let y = gaussian_vector(10, 1.0, &mut rng);
        let prob = RecoveryProblem::new(&a, &y, s).unwrap();
        let warm = matching_pursuit_warm_start(&prob);
        let res = recover(&prob).unwrap();
        prop_assert!(res.objective <= prob.objective(&warm) * (1.0 + 1e-12) + 1e-15);
        prop_assert!(res.is_monotone());
        prop_assert!(res.support().len() <= s);
    }

    #[test]
    fn objective_never_below_the_exhaustive_optimum(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let a = make_measurement_matrix(5, 8, &mut rng).unwrap();
        let y = gaussian_vector(5, 1.0, &mut rng);
        let res = recover(&RecoveryProblem::new(&a, &y, 2).unwrap()).unwrap();
        let (best, _) = brute_force_sparse_ls(&a.a, &y, 2);
        prop_assert!(res.objective >= best - 1e-10);
    }
}
