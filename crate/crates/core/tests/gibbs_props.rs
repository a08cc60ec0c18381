use koopman_core::fock::{inner, FockRep};
use koopman_core::gibbs;
use koopman_core::scalar::rational;
use koopman_core::weyl::{CanonicalGenerators, FVector, FloatElement};
use num_complex::Complex64;
use proptest::prelude::*;

fn fvector() -> impl Strategy<Value = FVector> {
    [-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0].prop_map(|[a, b, c, d]| FVector::new(a, b, c, d))
}

fn factors() -> impl Strategy<Value = Vec<(f64, FVector)>> {
    prop::collection::vec((-3.0f64..3.0, fvector()), 1..5)
}

/// Random combination of products of at most three generators.
fn element() -> impl Strategy<Value = Vec<(Vec<usize>, f64, f64)>> {
    prop::collection::vec((prop::collection::vec(0usize..4, 0..=3), -2.0f64..2.0, -2.0f64..2.0), 1..5)
}

fn build(g: &CanonicalGenerators<Complex64>, spec: &[(Vec<usize>, f64, f64)]) -> FloatElement {
    let base = [&g.q, &g.p, &g.big_q, &g.big_p];
    spec.iter().fold(FloatElement::zero(), |acc, (word, re, im)| {
        let w = word.iter().fold(FloatElement::one(), |w, &i| w.multiply(base[i]));
        &acc + &w.scale(&Complex64::new(*re, *im))
    })
}

#[test]
fn exact_moment_oracle_up_to_degree_eight() {
    let g = CanonicalGenerators::exact(rational(1, 1));
    let one = rational(1, 1);
    for total in 0..=8u32 {
        for m in 0..=total {
            let v = gibbs::eval(&g.q.pow(m).multiply(&g.p.pow(total - m)));
            assert_eq!(v.re, gibbs::raw_moment_exact(m, total - m, &one), "q^{m} p^{}", total - m);
            assert_eq!(v.im, rational(0, 1));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generating_function_is_bounded(pairs in factors(), kt in 0.1f64..4.0) {
        prop_assert!(gibbs::generating_function(&pairs, kt).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn reversed_factors_conjugate(pairs in factors(), kt in 0.1f64..4.0) {
        let g = gibbs::generating_function(&pairs, kt);
        let mut rev = pairs.clone();
        rev.reverse();
        // the adjoint of the product reverses it and negates each exponent
        let adj: Vec<(f64, FVector)> = rev.iter().map(|(l, f)| (-l, *f)).collect();
        let tol = 1e-12 * g.norm().max(1e-300);
        prop_assert!((gibbs::generating_function(&adj, kt) - g.conj()).norm() <= tol.max(1e-15));
        prop_assert!((gibbs::generating_function(&rev, kt) - g.conj()).norm() <= tol.max(1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn state_is_positive(spec in element(), kt in 0.25f64..2.0) {
        let g = CanonicalGenerators::new(kt).unwrap();
        let a = build(&g, &spec);
        let v = gibbs::eval(&a.adjoint().multiply(&a));
        prop_assert!(v.re >= -1e-12, "rho(A^+A) = {v}");
        prop_assert!(v.im.abs() <= 1e-9 * (1.0 + v.re.abs()));
        // the same number as a squared norm in the Fock representation
        let rep = FockRep::build(16, kt).unwrap();
        let u = rep.gns_vector(&a).unwrap();
        let norm = inner(&u, &u).re;
        prop_assert!((norm - v.re).abs() <= 1e-9 * (1.0 + norm));
    }
}
