use kamcert_core::geometry::{DomainSpec, SurfaceSpec};
use kamcert_core::ledger::build_ledger;
use kamcert_core::measure::*;
use proptest::prelude::*;

fn unit_det(_: &[f64]) -> f64 {
    1.0
}

fn sys(eps: f64, m: f64, l: f64, p: f64) -> SystemData {
    SystemData { d: 2, m, l, p_norm: p, epsilon: eps, rho: 0.9, s: 0.5 }
}

fn sampler() -> DetSampler<'static> {
    DetSampler { det: &unit_det, lip: 0.0, per_axis: 5 }
}

fn unit_box() -> DomainSpec {
    DomainSpec::Box { lo: vec![0.0; 2], hi: vec![1.0; 2] }
}

fn ball() -> SurfaceSpec {
    SurfaceSpec::Sphere { center: vec![0.0; 2], radius: 1.0 }
}

/// An ε comfortably inside the applicability threshold of the given data.
fn small_eps(m: f64, l: f64, p: f64) -> f64 {
    let led = build_ledger(2, 2.0).unwrap();
    let rep = general_case_bound(&sys(0.0, m, l, p), &unit_box(), &sampler(), 0.25, &led).unwrap();
    1e-3 * rep.epsilon_star_actions
}

#[test]
fn sqrt_epsilon_scaling_is_exact() {
    let led = build_ledger(2, 2.0).unwrap();
    let eps = small_eps(1.0, 1.0, 4.37);
    let g1 = general_case_bound(&sys(eps, 1.0, 1.0, 4.37), &unit_box(), &sampler(), 0.25, &led).unwrap();
    let g4 = general_case_bound(&sys(4.0 * eps, 1.0, 1.0, 4.37), &unit_box(), &sampler(), 0.25, &led).unwrap();
    assert_eq!(g4.bound.unwrap(), 2.0 * g1.bound.unwrap());
    let s1 = smooth_case_bound(&sys(eps, 1.0, 1.0, 4.37), &ball(), &sampler(), 0.25, &led).unwrap();
    let s4 = smooth_case_bound(&sys(4.0 * eps, 1.0, 1.0, 4.37), &ball(), &sampler(), 0.25, &led).unwrap();
    assert_eq!(s4.bound.unwrap(), 2.0 * s1.bound.unwrap());
    let zero = general_case_bound(&sys(0.0, 1.0, 1.0, 4.37), &unit_box(), &sampler(), 0.25, &led).unwrap();
    assert_eq!(zero.bound, Some(0.0));
}

#[test]
fn not_applicable_is_reported() {
    let led = build_ledger(2, 2.0).unwrap();
    let rep = general_case_bound(&sys(1e-4, 1.0, 1.0, 4.37), &unit_box(), &sampler(), 0.25, &led).unwrap();
    assert_eq!(rep.outcome, Outcome::NotApplicable);
    assert!(rep.bound.is_none());
    assert!(rep.epsilon > rep.epsilon_star_actions);
}

#[test]
fn general_bound_decomposes_into_tube_and_resonant_terms() {
    // with θ₀ = M^d/δ₀ the bound is (5/4)(2π)^d·(tube term + resonant-zone measure at α = α*√ε)
    let led = build_ledger(2, 2.0).unwrap();
    let eps = small_eps(1.0, 1.0, 4.37);
    let rep = general_case_bound(&sys(eps, 1.0, 1.0, 4.37), &unit_box(), &sampler(), 0.25, &led).unwrap();
    assert_eq!(rep.theta0, 1.0);
    let alpha = rep.alpha_star * eps.sqrt();
    let n = rep.covering_count;
    let resonant = resonant_zone_measure(2, led.s_hi, alpha, n, rep.delta0.value, rep.m, rep.r_bar);
    let tube = 2.0 * 16.0 / led.c0 * rep.theta0 * n / rep.m * rep.r_bar * alpha;
    let expect = 1.25 * (2.0 * std::f64::consts::PI).powi(2) * (tube + resonant);
    let got = rep.bound.unwrap();
    assert!((got - expect).abs() <= 1e-13 * expect, "{got} vs {expect}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_are_monotone(f1 in 0.01f64..1.0, f2 in 1.0f64..3.0, p in 0.5f64..10.0, m in 1.0f64..2.0, l in 1.0f64..2.0) {
        let led = build_ledger(2, 2.0).unwrap();
        let eps = small_eps(2.0, 2.0, 30.0) * f1;
        // ε and P: general and smooth
        let a = general_case_bound(&sys(eps, m, l, p), &unit_box(), &sampler(), 0.25, &led).unwrap();
        let b = general_case_bound(&sys(eps * f2, m, l, p), &unit_box(), &sampler(), 0.25, &led).unwrap();
        let c = general_case_bound(&sys(eps, m, l, p * f2), &unit_box(), &sampler(), 0.25, &led).unwrap();
        prop_assert!(b.bound.unwrap() >= a.bound.unwrap());
        prop_assert!(c.bound.unwrap() >= a.bound.unwrap());
        prop_assert!(c.alpha_star >= a.alpha_star);
        // M and L enter r̄ only through θ in the general case; the smooth r̄ does not move
        let s0 = smooth_case_bound(&sys(eps, m, l, p), &ball(), &sampler(), 0.25, &led).unwrap();
        let sm = smooth_case_bound(&sys(eps, m * f2.sqrt(), l, p), &ball(), &sampler(), 0.25, &led).unwrap();
        let sl = smooth_case_bound(&sys(eps, m, l * f2.sqrt(), p), &ball(), &sampler(), 0.25, &led).unwrap();
        let se = smooth_case_bound(&sys(eps * f2, m, l, p), &ball(), &sampler(), 0.25, &led).unwrap();
        prop_assert!(sm.bound.unwrap() >= s0.bound.unwrap());
        prop_assert!(sl.bound.unwrap() >= s0.bound.unwrap());
        prop_assert!(se.bound.unwrap() >= s0.bound.unwrap());
        prop_assert!(a.bound.unwrap() >= 0.0 && s0.bound.unwrap() >= 0.0);
    }

    #[test]
    fn sqrt_scaling_for_any_factor(c in 0.1f64..3.0) {
        let led = build_ledger(2, 2.0).unwrap();
        let eps = small_eps(1.0, 1.0, 4.37) / 9.0;
        let a = general_case_bound(&sys(eps, 1.0, 1.0, 4.37), &unit_box(), &sampler(), 0.25, &led).unwrap();
        let b = general_case_bound(&sys(c * c * eps, 1.0, 1.0, 4.37), &unit_box(), &sampler(), 0.25, &led).unwrap();
        prop_assert!((b.bound.unwrap() / a.bound.unwrap() - c).abs() <= 1e-14 * c);
    }
}
