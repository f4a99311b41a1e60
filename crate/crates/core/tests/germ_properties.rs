use proptest::prelude::*;
use pseudogroup::germ::{tangency_order, AddedTerm, Germ};
use pseudogroup::jet::{jet_distance, Jet, DEFAULT_ORDER};
use pseudogroup::Complex64 as C;

fn arb_c(max: f64) -> impl Strategy<Value = C> {
    (0.0..max, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C::from_polar(r, t))
}

fn arb_primitive() -> impl Strategy<Value = Germ> {
    prop_oneof![
        (0.3f64..3.0, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Germ::linear(C::from_polar(r, t)).unwrap()),
        arb_c(2.0).prop_map(|a| Germ::mobius(a).unwrap()),
        (0.5f64..2.0, arb_c(0.3), arb_c(0.2)).prop_map(|(l, c2, c3)| {
            Germ::poly_additive(Germ::linear(C::new(l, 0.0)).unwrap(), AddedTerm::Coefficients(vec![C::default(), c2, c3]), None)
                .unwrap()
        }),
    ]
}

fn arb_germ() -> impl Strategy<Value = Germ> {
    prop_oneof![
        3 => arb_primitive(),
        1 => (arb_primitive(), arb_primitive()).prop_map(|(a, b)| Germ::compose(&a, &b).unwrap()),
    ]
}

fn arb_jet() -> impl Strategy<Value = Jet> {
    proptest::collection::vec(arb_c(2.0), DEFAULT_ORDER).prop_map(Jet::new)
}

/// `z + c z^{α+1} + ...`.
fn arb_tangent(alpha: u32) -> impl Strategy<Value = Germ> {
    (arb_c(0.5), arb_c(0.5)).prop_map(move |(c1, c2)| {
        let mut coeffs = vec![C::default(); alpha as usize];
        coeffs.push(c1);
        coeffs.push(c2);
        Germ::poly_additive(Germ::identity(), AddedTerm::Coefficients(coeffs), None).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn inverse_undoes_evaluation(g in arb_germ(), s in 0.0f64..1.0, t in 0.0..std::f64::consts::TAU) {
        let r = 0.5 * g.radius().min(1.0);
        let z = C::from_polar(s * r, t);
        let w = g.evaluate(z).unwrap();
        let inv = g.inverse().unwrap();
        prop_assume!(w.norm() < 0.9 * inv.radius());
        let back = inv.evaluate(w).unwrap();
        prop_assert!((back - z).norm() < 1e-10, "{g}: {z} -> {w} -> {back}");
    }

    #[test]
    fn derivative_at_origin_is_the_first_jet_coefficient(g in arb_germ()) {
        let d = g.derivative(C::default()).unwrap();
        prop_assert!((d - g.taylor_jet(DEFAULT_ORDER).coeff(1)).norm() < 1e-10);
    }

    #[test]
    fn tangency_survives_composition(
        (alpha, a, b) in (0u32..=3).prop_flat_map(|k| (Just(k), arb_tangent(k), arb_tangent(k)))
    ) {
        let ab = Germ::compose(&a, &b).unwrap();
        prop_assert!(tangency_order(&ab, DEFAULT_ORDER) >= alpha);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn analytic_distance_is_a_metric_on_jets(a in arb_jet(), b in arb_jet(), c in arb_jet()) {
        let (ab, ba) = (jet_distance(&a, &b), jet_distance(&b, &a));
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(jet_distance(&a, &a), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
        let (bc, ac) = (jet_distance(&b, &c), jet_distance(&a, &c));
        prop_assert!(ab + bc - ac >= -1e-12, "{ab} + {bc} < {ac}");
    }

    #[test]
    fn jets_differing_in_one_coefficient_are_at_positive_distance(a in arb_jet(), k in 1usize..=DEFAULT_ORDER, d in arb_c(1.0)) {
        prop_assume!(d.norm() > 0.0);
        let mut coeffs = a.coeffs().to_vec();
        coeffs[k - 1] += d;
        let b = Jet::new(coeffs);
        prop_assert!(jet_distance(&a, &b) > 0.0);
    }
}
