use std::collections::BTreeSet;

use opacue_core::abstraction::{
    build_abstraction, check_quantization, sampled_system, AbstractionOptions, QuantizationParams,
};
use opacue_core::boxes::{grid_indices, BoxSet, IntervalBox, LATTICE_TOLERANCE};
use opacue_core::control::{parse_control_system, DtControlSystem, IssCertificate};
use opacue_core::oracle::brute_force_opacity;
use opacue_core::simulation::opacity_via_abstraction;
use opacue_core::{ObserverConfig, OpacityNotion, Verdict};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Lattice points found by scanning the box at a tenth of the step and
/// snapping each scan point to its nearest multiple of the step.
fn dense_oracle(b: &IntervalBox, step: f64) -> BTreeSet<Vec<i64>> {
    let axes: Vec<BTreeSet<i64>> = (0..b.dim())
        .map(|i| {
            let (lo, hi) = (b.lo[i], b.hi[i]);
            let fine = step / 10.0;
            let n = ((hi - lo) / fine).ceil() as i64;
            (0..=n + 1)
                .map(|j| (lo + j as f64 * fine).min(hi))
                .map(|p| (p / step).round() as i64)
                .filter(|&k| {
                    let v = k as f64 * step;
                    v >= lo - LATTICE_TOLERANCE * step && v <= hi + LATTICE_TOLERANCE * step
                })
                .collect()
        })
        .collect();
    let mut out: BTreeSet<Vec<i64>> = [Vec::new()].into_iter().collect();
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

fn nonlinear() -> DtControlSystem {
    parse_control_system(
        br#"{"dim": 2, "state_box": [[-1, 1], [-1, 1]], "secret_box": [[0.5, 1], [-1, 1]],
             "input_box": [[-0.2, 0.2]],
             "dynamics": ["0.5*sin(x1) + 0.2*x2 + u1", "0.4*x2 - 0.1*x1*x1 + 0.5*u1"],
             "output": ["x1"],
             "iss_cert": {"c": 1, "lambda": 0.7, "g": 1, "a": 1}}"#,
    )
    .unwrap()
}

fn unsound() -> AbstractionOptions {
    AbstractionOptions { unsound: true, ..AbstractionOptions::default() }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn unit_interval_examples() {
    let s = BoxSet::single(&[[-1.0, 1.0], [-1.0, 1.0]]).unwrap();
    assert_eq!(grid_indices(&s, 1.0, 100).unwrap().len(), 9);
}

#[test]
fn successors_are_exactly_the_eta_ball() {
    let sys = nonlinear();
    let params = QuantizationParams { eta: 0.25, mu: 0.1, epsilon: 1.0 };
    let abs = build_abstraction(&sys, &params, &unsound()).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let n = abs.system.num_states();
    for _ in 0..1000 {
        let s = rng.gen_range(0..n);
        let u = rng.gen_range(0..abs.input_points.len());
        let f = sys.step(&abs.state_points[s], &abs.input_points[u]);
        let expected: BTreeSet<usize> =
            (0..n).filter(|&t| sup_distance(&abs.state_points[t], &f) <= params.eta).collect();
        let got: BTreeSet<usize> = abs.system.successors(s, u).iter().copied().collect();
        assert_eq!(got, expected, "state {:?}, input {:?}", abs.state_points[s], abs.input_points[u]);
    }
}

#[test]
fn halving_eta_keeps_every_match() {
    let sys = nonlinear();
    let coarse = QuantizationParams { eta: 0.25, mu: 0.1, epsilon: 1.0 };
    let fine = QuantizationParams { eta: 0.125, ..coarse };
    let a = build_abstraction(&sys, &coarse, &unsound()).unwrap();
    let b = build_abstraction(&sys, &fine, &unsound()).unwrap();
    let fine_index = |p: &[f64]| b.state_points.iter().position(|q| q == p).unwrap();
    for (s, x) in a.state_points.iter().enumerate() {
        let fs = fine_index(x);
        for u in 0..a.input_points.len() {
            let f = sys.step(x, &a.input_points[u]);
            let coarse_succ = a.system.successors(s, u);
            let fine_succ = b.system.successors(fs, u);
            assert!(!fine_succ.is_empty());
            // Every fine successor is within the coarse tolerance of f, and
            // so is every coarse successor; f itself is covered at η/2.
            for &t in fine_succ {
                assert!(sup_distance(&b.state_points[t], &f) <= coarse.eta / 2.0);
            }
            for &t in coarse_succ {
                let p = &a.state_points[t];
                let covered = fine_succ.iter().any(|&q| sup_distance(&b.state_points[q], p) <= coarse.eta + fine.eta);
                assert!(covered, "{p:?}");
            }
        }
    }
}

#[test]
fn related_abstract_outputs_stay_within_epsilon() {
    // ε-output-closeness at related points, checked along sampled concrete
    // trajectories of x⁺ = 0.5x + u with the nearest abstract state.
    let sys = parse_control_system(
        br#"{"dim": 1, "state_box": [[0, 1]], "secret_box": [[0.9, 1]], "input_box": [[0, 0.1]],
             "dynamics": ["0.5*x1 + u1"], "output": ["x1"],
             "iss_cert": {"c": 1, "lambda": 0.5, "g": 2, "a": 1}}"#,
    )
    .unwrap();
    let params = QuantizationParams { eta: 0.05, mu: 0.05, epsilon: 0.4 };
    let abs = build_abstraction(&sys, &params, &AbstractionOptions::default()).unwrap();
    assert!(abs.certified);
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..200 {
        let mut x = vec![rng.gen_range(0.0..=1.0)];
        let mut xh = abs
            .state_points
            .iter()
            .min_by(|a, b| (a[0] - x[0]).abs().total_cmp(&(b[0] - x[0]).abs()))
            .unwrap()
            .clone();
        for _ in 0..20 {
            assert!((sys.observe(&x)[0] - sys.observe(&xh)[0]).abs() <= params.epsilon);
            let u = rng.gen_range(0..abs.input_points.len());
            let s = abs.state_points.iter().position(|p| *p == xh).unwrap();
            let next = sys.step(&x, &abs.input_points[u]);
            // Any successor of the abstract state is a legal abstract move;
            // take the one the concrete run ends closest to.
            let t = *abs
                .system
                .successors(s, u)
                .iter()
                .min_by(|&&a, &&b| (abs.state_points[a][0] - next[0]).abs().total_cmp(&(abs.state_points[b][0] - next[0]).abs()))
                .unwrap();
            x = next;
            xh = abs.state_points[t].clone();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn grid_matches_dense_enumeration(
        dim in 1usize..=2,
        corners in prop::collection::vec((-2.0f64..2.0, 0.05f64..2.0), 2),
        ratio in 0.05f64..1.0,
    ) {
        let bounds: Vec<[f64; 2]> = corners[..dim].iter().map(|&(lo, w)| [lo, lo + w]).collect();
        let b = IntervalBox::new(&bounds).unwrap();
        let step = ratio * b.width();
        let set = BoxSet::new(dim, vec![b.clone()]).unwrap();
        let got: BTreeSet<Vec<i64>> = grid_indices(&set, step, 1 << 20).unwrap().into_iter().collect();
        prop_assert_eq!(got, dense_oracle(&b, step));
    }

    #[test]
    fn quantization_is_monotone(
        c in 1.0f64..3.0, lambda in 0.01f64..0.99, g in 0.0f64..3.0, a in 0.1f64..3.0,
        eta in 0.0f64..0.5, mu in 0.0f64..0.5, eps in 0.01f64..2.0, bump in 0.0f64..0.5,
    ) {
        let cert = IssCertificate { c, lambda, g, a };
        let base = check_quantization(&cert, &QuantizationParams { eta, mu, epsilon: eps });
        prop_assert_eq!(base.pass, base.slack >= 0.0);
        prop_assert!((base.rhs - base.lhs - base.slack).abs() <= 1e-12 * base.rhs.abs().max(1.0));
        let coarser = check_quantization(&cert, &QuantizationParams { eta: eta + bump, mu: mu + bump, epsilon: eps });
        prop_assert!(coarser.slack <= base.slack);
        let zero = check_quantization(&cert, &QuantizationParams { eta: 0.0, mu: 0.0, epsilon: eps });
        prop_assert_eq!(zero.pass, c * lambda <= 1.0);
    }

    /// Opacity lifted from the abstraction is never contradicted by direct
    /// verification of the sampled concrete system.
    #[test]
    fn lifted_verdicts_hold_on_the_sampled_system(
        a in 0.05f64..0.6,
        secret_lo in prop::sample::select(vec![0.8, 0.85, 0.9, 0.95]),
        delta in prop::sample::select(vec![0.4, 0.45, 0.5, 0.6, 0.7]),
    ) {
        let doc = format!(
            r#"{{"dim": 1, "state_box": [[0, 1]], "secret_box": [[{secret_lo}, 1]], "input_box": [[0, 0.05]],
                "dynamics": ["{a}*x1 + u1"], "output": ["x1"],
                "iss_cert": {{"c": 1, "lambda": {a}, "g": {g}, "a": 1}}}}"#,
            g = 1.0 / (1.0 - a)
        );
        let sys = parse_control_system(doc.as_bytes()).unwrap();
        let params = QuantizationParams { eta: 0.05, mu: 0.0125, epsilon: 0.15 };
        let abs = build_abstraction(&sys, &params, &unsound()).unwrap();
        let concrete = sampled_system(&sys, 0.025, params.mu, 1 << 16).unwrap();
        let lifted = opacity_via_abstraction(&concrete, &abs.system, params.epsilon, delta, &ObserverConfig::default()).unwrap();
        if lifted.verification.verdict == Verdict::Opaque {
            let direct = brute_force_opacity(&concrete, delta, OpacityNotion::InitialState, 1_000_000, &ObserverConfig::default()).unwrap();
            prop_assert_eq!(direct.verdict, Verdict::Opaque);
        }
    }
}
