use kamcert_core::engine::homological::*;
use kamcert_core::engine::system::golden;
use kamcert_core::{FourierTaylorFunction, FrequencyVector};
use proptest::prelude::*;

fn trig_poly() -> impl Strategy<Value = (FourierTaylorFunction, usize)> {
    let term = (
        proptest::collection::vec(0u32..=2, 2),
        proptest::collection::vec(-6i32..=6, 2),
        -1.0f64..1.0,
        0.0f64..6.3,
    );
    (proptest::collection::vec(term, 1..12), 1usize..=12).prop_map(|(ts, kappa)| {
        let mut f = FourierTaylorFunction::zero(2, vec![0.0; 2], 1.0, 1.0, 4, 12).unwrap();
        for (a, k, amp, ph) in ts {
            if a.iter().sum::<u32>() <= 4 {
                f.add_cos(a, k, amp, ph).unwrap();
            }
        }
        (f, kappa)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn homological_identity_is_exact((f, kappa) in trig_poly()) {
        let w = FrequencyVector::certify(vec![golden(), 1.0], 2.0, 24).unwrap();
        let exact = solve_homological_exact(&f, &w.omega, kappa).unwrap();
        prop_assert!(homological_defect_exact(&f, &exact, &w.omega, kappa).is_empty());
        let u = solve_homological(&f, &w, kappa).unwrap();
        prop_assert!(u.entries().all(|((_, k), _)| k.iter().any(|&v| v != 0)));
        // binary64 solve: ω·k rounded once, then one division
        prop_assert!(deviation_from_exact(&u, &exact) <= 4.0 * f64::EPSILON);
        let (amp, _) = max_amplification(&f, &u);
        prop_assert!(amp <= (kappa as f64).powf(w.tau) / w.alpha * (1.0 + 1e-12));
    }
}
