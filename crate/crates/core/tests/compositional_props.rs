use opacue_core::barrier::{check_opacity_barrier, BarrierCondition, BarrierOptions, CheckStatus};
use opacue_core::compositional::{
    compose_barriers, compose_simulation, interconnect, small_gain, CompositionCheck, Interface, LinearSubsystem,
    LocalCondition, MaxComposition,
};
use opacue_core::polynomial::Evaluator;
use proptest::prelude::*;

fn sub(a: f64, b: f64) -> LinearSubsystem {
    LinearSubsystem::new(a, b, [0.0, 1.0], &[[0.0, 0.1], [0.9, 1.0]], &[[0.9, 1.0]]).unwrap()
}

fn max_norm(x: &[f64], xh: &[f64]) -> f64 {
    x[0].abs().max(xh[0].abs())
}

#[derive(Clone)]
struct Scaled(f64);

impl Evaluator for Scaled {
    fn eval(&self, x: &[f64], xh: &[f64]) -> f64 {
        self.0 * max_norm(x, xh)
    }
}

#[derive(Clone)]
struct Affine(f64, f64);

impl Evaluator for Affine {
    fn eval(&self, x: &[f64], xh: &[f64]) -> f64 {
        self.0 * x[0] + self.1 * xh[0]
    }
}

#[test]
fn norm_certificate_meets_its_lower_bound_with_equality() {
    let (_, report) = compose_barriers(max_norm, max_norm, &sub(0.5, 0.2), &sub(0.5, 0.2), 0.2, 0.05).unwrap();
    for i in [1, 2] {
        let lower = report.local(i, LocalCondition::LowerBound).unwrap();
        assert_eq!((lower.violations, lower.min_margin), (0, Some(0.0)));
    }
}

#[test]
fn composed_norm_certificate_passes_the_interconnected_check() {
    let (s1, s2) = (sub(0.5, 0.2), sub(0.5, 0.2));
    let (comp, report) = compose_barriers(max_norm, max_norm, &s1, &s2, 0.2, 0.05).unwrap();
    assert_eq!(report.status, CheckStatus::SamplePassed);
    let direct = check_opacity_barrier(&comp, &interconnect(&s1, &s2).unwrap(), 0.2, &BarrierOptions::new(0.05)).unwrap();
    assert_eq!(direct.status, CheckStatus::SamplePassed);
    assert!(direct.stats_for(BarrierCondition::Unsafe).unwrap().samples > 0);
}

#[test]
fn local_conditions_do_not_license_an_unweighted_max_when_one_gain_exceeds_one() {
    // γ₁ = 1.6, γ₂ = 0.2: the product passes and every local condition holds,
    // but at x = x̂ = (1, 1) the first coordinate grows to 1.3.
    let (s1, s2) = (sub(0.5, 0.8), sub(0.5, 0.1));
    assert!(small_gain(&s1, &s2).small_gain_ok);
    let (_, report) = compose_barriers(max_norm, max_norm, &s1, &s2, 0.2, 0.05).unwrap();
    assert!(report.locals.iter().all(|c| c.violations == 0));
    let Some(CompositionCheck::Barrier(composed)) = &report.composed else { panic!("no composed check") };
    assert_eq!(composed.condition, Some(BarrierCondition::Decrease));
    assert_eq!(report.status, CheckStatus::Falsified);
}

#[test]
fn composed_simulation_step_on_the_reference_instance() {
    let dist = |x: &[f64], xh: &[f64]| (x[0] - xh[0]).abs();
    let iface = Interface { eta: 0.1, epsilon: 0.2, theta: 0.2 };
    let (comp, report) = compose_simulation(dist, dist, &sub(0.5, 0.2), &sub(0.5, 0.2), [iface; 2], 0.05).unwrap();
    let Some(CompositionCheck::Simulation(checks)) = &report.composed else { panic!("no composed check") };
    assert_eq!(checks[0].violations, 0);
    assert!(checks[0].samples > 0);
    let zero = |_: &[f64], _: &[f64]| 0.0;
    assert_eq!(MaxComposition { locals: [zero, zero] }.eval(&[0.3, 0.7], &[0.1, 0.2]), 0.0);
    assert_eq!(comp.eval(&[0.25, 0.75], &[0.125, 0.25]), 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gain_scales_with_b(a in -0.99f64..0.99, b in -5.0f64..5.0, t in -8.0f64..8.0, k in -4i32..4) {
        let g = sub(a, b).gain();
        let scaled = sub(a, t * b).gain();
        prop_assert!((scaled - t.abs() * g).abs() <= 4.0 * f64::EPSILON * scaled.abs().max(f64::MIN_POSITIVE));
        let p = 2f64.powi(k);
        prop_assert_eq!(sub(a, p * b).gain(), p * g);
    }

    #[test]
    fn product_test_matches_its_definition(a1 in -0.99f64..0.99, b1 in -2.0f64..2.0, a2 in -0.99f64..0.99, b2 in -2.0f64..2.0) {
        let g = small_gain(&sub(a1, b1), &sub(a2, b2));
        prop_assert_eq!(g.gamma1, (b1 / (1.0 - a1)).abs());
        prop_assert_eq!(g.gamma2, (b2 / (1.0 - a2)).abs());
        prop_assert_eq!(g.small_gain_ok, g.gamma1 * g.gamma2 < 1.0);
    }

    #[test]
    fn max_composition_laws(
        k1 in 0.0f64..3.0, k2 in 0.0f64..3.0, extra in 0.0f64..1.0,
        x in prop::array::uniform2(-1.0f64..1.0), xh in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let (v1, v2) = (Scaled(k1), Scaled(k2));
        let same = MaxComposition { locals: [v1.clone(), v1.clone()] };
        prop_assert_eq!(same.eval(&[x[0], x[0]], &[xh[0], xh[0]]), v1.eval(&x[..1], &xh[..1]));
        let fwd = MaxComposition { locals: [v1.clone(), v2.clone()] };
        let rev = MaxComposition { locals: [v2.clone(), v1.clone()] };
        prop_assert_eq!(fwd.eval(&x, &xh), rev.eval(&[x[1], x[0]], &[xh[1], xh[0]]));
        let bigger = MaxComposition { locals: [Scaled(k1 + extra), v2.clone()] };
        prop_assert!(bigger.eval(&x, &xh) >= fwd.eval(&x, &xh));
        prop_assert_eq!(fwd.eval(&x, &xh), v1.eval(&x[..1], &xh[..1]).max(v2.eval(&x[1..], &xh[1..])));
    }

    /// Where both subsystems have gain below one, local success carries
    /// over to the interconnection.
    #[test]
    fn local_success_carries_over(
        a1 in 0.0f64..0.95, r1 in 0.0f64..1.0, a2 in 0.0f64..0.95, r2 in 0.0f64..1.0,
        k in 1.0f64..3.0, c in -0.5f64..0.5,
    ) {
        let (s1, s2) = (sub(a1, r1 * (1.0 - a1) * 0.99), sub(a2, r2 * (1.0 - a2) * 0.99));
        prop_assume!(s1.gain() < 1.0 && s2.gain() < 1.0);
        for (e1, e2) in [(Scaled(k), Scaled(k)), (Scaled(k), Scaled(1.0 + c.abs()))] {
            let (_, report) = compose_barriers(e1, e2, &s1, &s2, 0.2, 0.1).unwrap();
            if report.locals.iter().all(|l| l.violations == 0) {
                let Some(CompositionCheck::Barrier(composed)) = &report.composed else { panic!() };
                prop_assert_eq!(composed.status, CheckStatus::SamplePassed, "{:?}", composed.witness);
            }
        }
        // Candidates that fail locally are reported with a witness.
        let (_, report) = compose_barriers(Affine(1.0, c), Affine(1.0, c), &s1, &s2, 0.2, 0.1).unwrap();
        for l in &report.locals {
            prop_assert_eq!(l.violations > 0, l.witness.is_some());
        }
    }
}
