use koopman_core::scalar::{exact, rational, Exact};
use koopman_core::weyl::{CanonicalGenerators, ExactElement, Word};
use proptest::prelude::*;

fn coeff() -> impl Strategy<Value = Exact> {
    (-6i64..=6, 1i64..=4, -6i64..=6, 1i64..=4).prop_map(|(a, b, c, d)| exact(rational(a, b), rational(c, d)))
}

fn element(max_degree: u32) -> impl Strategy<Value = ExactElement> {
    prop::collection::vec(((0..=max_degree, 0..=max_degree, 0..=max_degree, 0..=max_degree), coeff()), 0..4).prop_map(move |terms| {
        ExactElement::from_terms(terms.into_iter().filter_map(|((ad, a, bd, b), c)| {
            let w = Word::new(ad, a, bd, b);
            (w.degree() <= max_degree).then_some((w, c))
        }))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn multiplication_is_associative(x in element(4), y in element(4), z in element(4)) {
        prop_assert_eq!(x.multiply(&y).multiply(&z), x.multiply(&y.multiply(&z)));
    }

    #[test]
    fn adjoint_reverses_products(x in element(4), y in element(4)) {
        prop_assert_eq!(x.multiply(&y).adjoint(), y.adjoint().multiply(&x.adjoint()));
    }

    #[test]
    fn heisenberg_pairs_for_any_kt(num in 1i64..40, den in 1i64..40) {
        let g = CanonicalGenerators::exact(rational(num, den));
        let one = ExactElement::one();
        prop_assert_eq!(g.big_q.commutator(&g.q), one.clone());
        prop_assert_eq!(g.big_p.commutator(&g.p), one);
        let zero_pairs = [(&g.q, &g.p), (&g.q, &g.big_p), (&g.p, &g.big_q), (&g.big_q, &g.big_p)];
        for (x, y) in zero_pairs {
            prop_assert!(x.commutator(y).is_zero());
            prop_assert!(y.commutator(x).is_zero());
        }
        let l = g.liouvillian();
        prop_assert_eq!(l.adjoint(), -&l);
    }
}
