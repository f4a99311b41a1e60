use proptest::prelude::*;
use pseudogroup::germ::{analytic_distance, AddedTerm, Germ};
use pseudogroup::jet::DEFAULT_ORDER;
use pseudogroup::perturbation::{
    perturb_conjugator, t_grid, vanishing_interpolant, Anchor, PerturbationStep, NODE_GAP,
};
use pseudogroup::word::Letter;
use pseudogroup::Complex64 as C;

fn arb_c(max: f64) -> impl Strategy<Value = C> {
    (0.0..max, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C::from_polar(r, t))
}

/// Conjugator tangent to the identity to order `alpha`, on the unit disc.
fn arb_conjugator(alpha: u32) -> impl Strategy<Value = Germ> {
    prop_oneof![
        Just(Germ::identity().with_radius(1.0)),
        arb_c(0.2).prop_map(move |c| {
            let mut coeffs = vec![C::default(); alpha.max(1) as usize];
            coeffs.push(c);
            Germ::poly_additive(Germ::identity(), AddedTerm::Coefficients(coeffs), Some(1.0)).unwrap()
        }),
    ]
}

fn arb_step(alpha: u32) -> impl Strategy<Value = Option<PerturbationStep>> {
    (proptest::collection::vec(arb_c(0.8), 0..=3), arb_c(0.8), arb_c(2.0), 0usize..23).prop_map(
        move |(zeros, anchor, value, k)| {
            let p = vanishing_interpolant(&zeros, Anchor { point: anchor, value }).ok()?;
            Some(PerturbationStep { target: Letter::A, interpolant: p, t: t_grid()[k], alpha })
        },
    )
}

fn arb_case() -> impl Strategy<Value = (u32, Germ, PerturbationStep)> {
    (0u32..=3).prop_flat_map(|a| {
        (Just(a), arb_conjugator(a), arb_step(a).prop_filter_map("nodes too close", |s| s))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn perturbation_keeps_low_jets_and_pins((alpha, h, step) in arb_case()) {
        let Ok(next) = perturb_conjugator(&h, &step) else {
            // Injectivity loss is a legitimate refusal.
            return Ok(());
        };
        let (j0, j1) = (h.taylor_jet(DEFAULT_ORDER), next.taylor_jet(DEFAULT_ORDER));
        for k in 1..=alpha as usize {
            prop_assert_eq!(j0.coeff(k), j1.coeff(k));
        }
        for z in &step.interpolant.zeros {
            if z.norm() > NODE_GAP {
                prop_assert!((next.evaluate(*z).unwrap() - h.evaluate(*z).unwrap()).norm() < 1e-10);
            }
        }
        let a = step.interpolant.anchor;
        let moved = next.evaluate(a.point).unwrap() - h.evaluate(a.point).unwrap();
        let want = a.value * step.t * a.point.powu(alpha + 1);
        prop_assert!((moved - want).norm() < 1e-12 * (1.0 + want.norm()));
    }

    #[test]
    fn distance_to_the_original_shrinks_with_t((_alpha, h, step) in arb_case()) {
        prop_assume!(step.interpolant.scale.norm() > 0.0);
        let mut last = f64::INFINITY;
        for t in t_grid() {
            let Ok(next) = perturb_conjugator(&h, &PerturbationStep { t, ..step.clone() }) else { continue };
            let d = analytic_distance(&h, &next, DEFAULT_ORDER);
            prop_assert!(d > 0.0 && d < last, "t = {t}: {d} after {last}");
            last = d;
        }
    }
}
