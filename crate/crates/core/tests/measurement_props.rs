use koopman_core::measurement::{
    self, luders_observable, luders_state, random, repeat_correlation, spectral, DensityMatrix, InstrumentSetup, Observable,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64) -> (ChaCha8Rng, usize, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 2 + (seed % 7) as usize;
    let degenerate = rand::Rng::random_bool(&mut rng, 0.5);
    (rng, d, degenerate)
}

fn observable(rng: &mut ChaCha8Rng, d: usize, degenerate: bool) -> Observable {
    let m = if degenerate { random::degenerate_hermitian(d, rng) } else { random::hermitian(d, rng) };
    Observable::new(m, "A").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn luders_identity_and_commutant(seed in any::<u64>()) {
        let (mut rng, d, deg) = setup(seed);
        let a = observable(&mut rng, d, deg);
        let x = Observable::new(random::hermitian(d, &mut rng), "X").unwrap();
        let rho = DensityMatrix::new(random::density(d, &mut rng)).unwrap();
        let sp = spectral(&a, None);
        let (orth, sum) = sp.residuals();
        prop_assert!(orth <= 1e-10 && sum <= 1e-10);
        prop_assert!(measurement::max_abs(&(sp.reconstruct() - &a.matrix)) <= 1e-9);
        let rho_a = luders_state(&rho, &sp).unwrap();
        let x_a = luders_observable(&x, &sp).unwrap();
        let lhs = measurement::trace(&(&a.matrix * &x.matrix * &rho_a.matrix));
        let rhs = measurement::trace(&(&a.matrix * &x_a.matrix * &rho.matrix));
        prop_assert!((lhs - rhs).norm() <= 1e-11);
        prop_assert!(measurement::max_abs(&(luders_observable(&x_a, &sp).unwrap().matrix - &x_a.matrix)) <= 1e-11);
        prop_assert!(measurement::max_abs(&measurement::commutator(&a.matrix, &x_a.matrix)) <= 1e-11);
        prop_assert!((measurement::trace(&rho_a.matrix).re - 1.0).abs() <= 1e-12);
        prop_assert!(rho_a.min_eigenvalue() >= -1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn repeat_measurement_is_perfectly_correlated(seed in any::<u64>()) {
        let (mut rng, d, deg) = setup(seed);
        let a = observable(&mut rng, d, deg);
        let rho = DensityMatrix::new(random::density(d, &mut rng)).unwrap();
        let r = repeat_correlation(&a, &rho).unwrap();
        prop_assert!(r.off_diagonal_mass <= 1e-12);
        for (m, s) in r.marginal.iter().zip(&r.single) {
            prop_assert!((m - s).abs() <= 1e-12);
        }
    }

    #[test]
    fn instrument_routes_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2 + (seed % 5) as usize;
        let basis = |u: &measurement::CMatrix| (0..d).map(|j| measurement::vector_to_json(&u.column(j).into_owned())).collect();
        let ua = random::unitary(d, &mut rng);
        let ub = random::unitary(d, &mut rng);
        let s = InstrumentSetup {
            dim: d,
            a_basis: basis(&ua),
            b_basis: basis(&ub),
            a_eigenvalues: None,
            b_eigenvalues: None,
            a_pointer_start: 0,
            b_pointer_start: 0,
            psi: None,
        };
        let r = measurement::instrument_joint(&s, &random::state(d, &mut rng)).unwrap();
        for j in 0..r.p_b_with_a.len() {
            prop_assert!((r.p_b_with_a[j] - r.p_b_bullet[j]).abs() <= 1e-12);
            prop_assert!((r.p_b_with_a[j] - r.p_b_luders_measurement[j]).abs() <= 1e-12);
            prop_assert!((r.p_b_with_a[j] - r.p_b_luders_state[j]).abs() <= 1e-12);
        }
        prop_assert!((r.total_probability - 1.0).abs() <= 1e-12);
        prop_assert!(r.unitarity_residual <= 1e-12);
    }
}
