use koopman_core::bell::{self, random_model, CatState, CountTable};
use koopman_core::measurement::{random, trace};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DIMS: [(usize, usize); 5] = [(2, 2), (2, 3), (3, 2), (2, 4), (4, 2)];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn commuting_models_obey_the_classical_bound(seed in any::<u64>(), dims in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (da, db) = DIMS[dims];
        let ops = random_model(da, db, true, &mut rng);
        let rho = random::density(da * db, &mut rng);
        prop_assert!(ops.chsh_value(&rho).abs() <= 2.0 + 1e-10);
        prop_assert!(bell::landau_c(&ops).c_squared_norm.sqrt() <= 2.0 + 1e-10);
    }

    #[test]
    fn any_model_obeys_tsirelson(seed in any::<u64>(), dims in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (da, db) = DIMS[dims];
        let ops = random_model(da, db, false, &mut rng);
        let rho = random::density(da * db, &mut rng);
        prop_assert!(ops.chsh_value(&rho).abs() <= 2.0 * 2f64.sqrt() + 1e-10);
        prop_assert!(bell::landau_c(&ops).identity_residual <= 1e-11);
    }

    #[test]
    fn block_scaling_leaves_correlations_unchanged(
        cells in prop::array::uniform16(1u64..5000),
        factors in prop::array::uniform4(1u64..50),
    ) {
        let mut t = CountTable { counts: [[0; 4]; 4] };
        let mut scaled = t;
        for r in 0..4 {
            for c in 0..4 {
                t.counts[r][c] = cells[4 * r + c];
                // block index from (Alice setting, Bob setting) of this cell
                let block = (c / 2) + 2 * (r / 2);
                scaled.counts[r][c] = cells[4 * r + c] * factors[block];
            }
        }
        let a = bell::correlations_from_counts(&t).unwrap();
        let b = bell::correlations_from_counts(&scaled).unwrap();
        prop_assert_eq!(a.as_array(), b.as_array());
        prop_assert_eq!(a.s, b.s);
    }

    #[test]
    fn cat_estimate_recovers_beta(alpha in 0.0f64..=1.0, frac in 0.0f64..=1.0, theta in -3.2f64..3.2) {
        let beta = Complex64::from_polar(frac * (alpha * (1.0 - alpha)).sqrt(), theta);
        let m = CatState::new(alpha, beta).unwrap().matrix();
        let est = bell::cat_discriminate(&m).unwrap();
        prop_assert!((est.beta - beta).norm() <= 1e-12);
        prop_assert_eq!(trace(&(bell::alive_projector() * &m)).re, alpha);
    }
}
