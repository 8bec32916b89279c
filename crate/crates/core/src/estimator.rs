//! The backward δ-approximate initial-state estimator.
//!
//! A state `(x, q)` pairs a reference state with the set of states from which
//! some run can produce outputs δ-close to the reference run that starts at
//! `x`. Transitions walk the reference run backwards.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::observer::{check_delta, ObserverConfig};
use crate::system::{InputId, MetricSystem, OpacityNotion, Path, StateId, StateSet};
use crate::verdict::{Stats, Verdict, Verification, Witness};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EstimatorState {
    pub reference: StateId,
    pub estimate: StateSet,
}

#[derive(Debug, Clone)]
pub struct Estimator {
    states: Vec<EstimatorState>,
    num_initial: usize,
    transitions: Vec<(usize, InputId, usize)>,
    parent: Vec<Option<(usize, InputId)>>,
    depth: Vec<usize>,
}

impl Estimator {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[EstimatorState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &EstimatorState {
        &self.states[i]
    }

    pub fn initial(&self) -> std::ops::Range<usize> {
        0..self.num_initial
    }

    /// `(from, u, to)` where the system has `to.reference -u-> from.reference`.
    pub fn transitions(&self) -> &[(usize, InputId, usize)] {
        &self.transitions
    }

    /// Fewest backward steps from an initial estimator state.
    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }

    /// The forward run from `state(i).reference` to the reference of the
    /// initial estimator state it was discovered from.
    pub fn forward_suffix(&self, i: usize) -> Path {
        let mut states = vec![self.states[i].reference];
        let mut inputs = Vec::new();
        let mut at = i;
        while let Some((p, u)) = self.parent[at] {
            states.push(self.states[p].reference);
            inputs.push(u);
            at = p;
        }
        Path { states, inputs }
    }

    /// Initial-state revelation: the reference is a secret initial state and
    /// every initial state in the estimate is secret.
    pub fn reveals_initial(&self, sys: &MetricSystem, i: usize) -> bool {
        let st = &self.states[i];
        if !(sys.is_initial(st.reference) && sys.is_secret(st.reference)) {
            return false;
        }
        let mut candidates = st.estimate.clone();
        candidates.intersect_with(sys.initial());
        candidates.is_subset(sys.secret())
    }
}

pub fn build_initial_estimator(
    sys: &MetricSystem,
    delta: f64,
    config: &ObserverConfig,
) -> Result<Estimator> {
    build_estimator_bounded(sys, delta, config, None)
}

/// Builds the estimator, stopping expansion past `max_depth` backward steps
/// when a bound is given.
pub fn build_estimator_bounded(
    sys: &MetricSystem,
    delta: f64,
    config: &ObserverConfig,
    max_depth: Option<usize>,
) -> Result<Estimator> {
    check_delta(delta)?;
    let n = sys.num_states();
    let balls = sys.closeness_balls(config.metric, delta);
    if n > config.cap {
        return Err(Error::Resource { what: "estimator states", cap: config.cap });
    }

    let mut states = Vec::with_capacity(n);
    let mut index: HashMap<EstimatorState, usize> = HashMap::new();
    let mut parent = Vec::with_capacity(n);
    let mut depth = Vec::with_capacity(n);
    let mut transitions = Vec::new();
    let mut queue = VecDeque::new();

    for x in 0..n {
        let st = EstimatorState { reference: x, estimate: balls[x].clone() };
        index.insert(st.clone(), states.len());
        queue.push_back(states.len());
        states.push(st);
        parent.push(None);
        depth.push(0);
    }
    let num_initial = states.len();

    while let Some(i) = queue.pop_front() {
        if max_depth.is_some_and(|d| depth[i] >= d) {
            continue;
        }
        let reference = states[i].reference;
        let back = sys.pre_any(&states[i].estimate);
        for u in 0..sys.num_inputs() {
            for &prev in sys.predecessors(reference, u) {
                let mut estimate = back.clone();
                estimate.intersect_with(&balls[prev]);
                let st = EstimatorState { reference: prev, estimate };
                let j = match index.entry(st) {
                    Entry::Occupied(e) => *e.get(),
                    Entry::Vacant(e) => {
                        let j = states.len();
                        if j >= config.cap {
                            return Err(Error::Resource { what: "estimator states", cap: config.cap });
                        }
                        states.push(e.key().clone());
                        e.insert(j);
                        parent.push(Some((i, u)));
                        depth.push(depth[i] + 1);
                        queue.push_back(j);
                        j
                    }
                };
                transitions.push((i, u, j));
            }
        }
    }

    Ok(Estimator {
        states,
        num_initial,
        transitions,
        parent,
        depth,
    })
}

/// Initial-state opacity through the backward estimator: opaque iff no
/// reachable `(x, q)` has `x` secret and initial with `q ∩ X0 ⊆ XS`.
pub fn verify_initial_state_by_estimator(
    sys: &MetricSystem,
    delta: f64,
    config: &ObserverConfig,
) -> Result<Verification> {
    let start = Instant::now();
    let est = build_initial_estimator(sys, delta, config)?;
    let verdict = match (0..est.num_states()).find(|&i| est.reveals_initial(sys, i)) {
        None => Verdict::Opaque,
        Some(i) => Verdict::NotOpaque(Witness {
            path: est.forward_suffix(i),
            reveal_instant: 0,
        }),
    };
    Ok(Verification {
        notion: OpacityNotion::InitialState,
        delta,
        verdict,
        stats: Stats {
            observer_states: est.num_states(),
            transitions: est.transitions().len(),
            wall_ms: start.elapsed().as_millis() as u64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_delta_makes_every_initial_estimate_full() {
        let sys = MetricSystem::new(
            vec![
                ("a".into(), vec![0.0]),
                ("b".into(), vec![0.4]),
                ("c".into(), vec![1.0]),
            ],
            vec!["u".into()],
            vec![0],
            vec![],
            vec![(0, 0, 1)],
        )
        .unwrap();
        let est = build_initial_estimator(&sys, 1.0, &ObserverConfig::default()).unwrap();
        for i in est.initial() {
            assert_eq!(est.state(i).estimate.count_ones(..), 3);
        }
    }

    #[test]
    fn backward_step_on_a_chain() {
        // s0 -u-> s1, H(s0) = 0, H(s1) = 1, delta = 0
        let sys = MetricSystem::new(
            vec![("s0".into(), vec![0.0]), ("s1".into(), vec![1.0])],
            vec!["u".into()],
            vec![0],
            vec![0],
            vec![(0, 0, 1)],
        )
        .unwrap();
        let est = build_initial_estimator(&sys, 0.0, &ObserverConfig::default()).unwrap();
        let from = est
            .states()
            .iter()
            .position(|s| s.reference == 1 && s.estimate.ones().eq([1]))
            .unwrap();
        let (_, _, to) = est
            .transitions()
            .iter()
            .copied()
            .find(|&(f, _, _)| f == from)
            .unwrap();
        assert_eq!(est.state(to).reference, 0);
        assert!(est.state(to).estimate.ones().eq([0]));
        // (s0, {s0}) is already the initial estimate of s0.
        assert!(est.initial().contains(&to));
    }

    #[test]
    fn depth_bound_stops_expansion() {
        let sys = MetricSystem::new(
            vec![("a".into(), vec![0.0]), ("b".into(), vec![1.0]), ("c".into(), vec![2.0])],
            vec!["u".into()],
            vec![0],
            vec![],
            vec![(0, 0, 1), (1, 0, 2)],
        )
        .unwrap();
        let full = build_initial_estimator(&sys, 1.0, &ObserverConfig::default()).unwrap();
        let bounded =
            build_estimator_bounded(&sys, 1.0, &ObserverConfig::default(), Some(1)).unwrap();
        assert!(bounded.num_states() < full.num_states());
        assert!((0..bounded.num_states()).all(|i| bounded.depth(i) <= 1));
    }
}
