use opacue_core::system::{delta_close, parse_system, serialize_system};
use opacue_core::testing::{random_system, RandomSystemParams};
use opacue_core::{MetricSystem, OutputMetric, StateSet};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn system(seed: u64) -> MetricSystem {
    let params = RandomSystemParams { output_dim: 2, ..Default::default() };
    random_system(&mut StdRng::seed_from_u64(seed), &params)
}

fn subset(sys: &MetricSystem, mask: u32) -> StateSet {
    sys.set_of((0..sys.num_states()).filter(|i| mask >> i & 1 == 1))
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 3)
}

proptest! {
    #[test]
    fn post_matches_a_scan_of_the_relation(seed in any::<u64>(), mask in any::<u32>()) {
        let sys = system(seed);
        let q = subset(&sys, mask);
        for u in 0..sys.num_inputs() {
            let label = sys.input_label(u).to_string();
            let post = sys.post(&q, &label).unwrap();
            let scan = sys.set_of(
                sys.transitions().iter().filter(|t| t.1 == u && q.contains(t.0)).map(|t| t.2),
            );
            prop_assert_eq!(&post, &scan);
            let pre = sys.pre(&q, &label).unwrap();
            let scan = sys.set_of(
                sys.transitions().iter().filter(|t| t.1 == u && q.contains(t.2)).map(|t| t.0),
            );
            prop_assert_eq!(pre, scan);
        }
    }

    #[test]
    fn pre_of_post_covers_states_with_successors(seed in any::<u64>(), mask in any::<u32>()) {
        let sys = system(seed);
        let q = subset(&sys, mask);
        for u in 0..sys.num_inputs() {
            let back = sys.pre_id(&sys.post_id(&q, u), u);
            for x in q.ones() {
                if !sys.successors(x, u).is_empty() {
                    prop_assert!(back.contains(x));
                }
            }
        }
    }

    #[test]
    fn infinity_metric_axioms(a in vec3(), b in vec3(), c in vec3()) {
        let m = OutputMetric::Infinity;
        prop_assert_eq!(m.distance(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(m.distance(&a, &b).unwrap(), m.distance(&b, &a).unwrap());
        let lhs = m.distance(&a, &c).unwrap();
        let rhs = m.distance(&a, &b).unwrap() + m.distance(&b, &c).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
        let naive = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert_eq!(m.distance(&a, &b).unwrap(), naive);
    }

    #[test]
    fn delta_close_is_reflexive_symmetric_monotone(a in vec3(), b in vec3(), d1 in 0.0f64..5.0, d2 in 0.0f64..5.0) {
        let m = OutputMetric::Infinity;
        prop_assert!(delta_close(m, &a, &a, 0.0).unwrap());
        prop_assert_eq!(delta_close(m, &a, &b, d1).unwrap(), delta_close(m, &b, &a, d1).unwrap());
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        if delta_close(m, &a, &b, lo).unwrap() {
            prop_assert!(delta_close(m, &a, &b, hi).unwrap());
        }
    }

    #[test]
    fn serialize_parse_round_trip(seed in any::<u64>()) {
        let sys = system(seed);
        let text = serialize_system(&sys);
        let back = parse_system(text.as_bytes()).unwrap();
        prop_assert_eq!(serialize_system(&back), text);
        prop_assert_eq!(back.to_document(), sys.to_document());
    }
}

#[test]
fn dimension_mismatch_is_reported() {
    assert!(delta_close(OutputMetric::Infinity, &[0.0], &[0.0, 1.0], 1.0).is_err());
}
