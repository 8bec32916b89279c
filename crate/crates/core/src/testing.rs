//! Random model generators shared by unit, property and acceptance tests.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::system::MetricSystem;

/// Output levels used by [`random_system`]. Spacing is chosen so the usual
/// test precisions (0, 0.05, 0.1, 0.5) all change which states are close.
pub const OUTPUT_LEVELS: [f64; 6] = [0.0, 0.05, 0.1, 0.15, 0.5, 0.6];

#[derive(Debug, Clone, Copy)]
pub struct RandomSystemParams {
    pub max_states: usize,
    pub max_inputs: usize,
    pub edge_probability: f64,
    pub initial_probability: f64,
    pub secret_probability: f64,
    pub output_dim: usize,
}

impl Default for RandomSystemParams {
    fn default() -> Self {
        RandomSystemParams {
            max_states: 5,
            max_inputs: 3,
            edge_probability: 0.3,
            initial_probability: 0.5,
            secret_probability: 0.4,
            output_dim: 1,
        }
    }
}

pub fn random_system<R: Rng>(rng: &mut R, p: &RandomSystemParams) -> MetricSystem {
    let n = rng.gen_range(1..=p.max_states);
    let m = rng.gen_range(1..=p.max_inputs);
    exact_random_system(rng, n, m, p)
}

/// Like [`random_system`] with exactly `n` states and `m` inputs.
pub fn exact_random_system<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    p: &RandomSystemParams,
) -> MetricSystem {
    let states = (0..n)
        .map(|i| {
            let y = (0..p.output_dim)
                .map(|_| *OUTPUT_LEVELS.choose(rng).unwrap())
                .collect();
            (format!("s{i}"), y)
        })
        .collect();
    let inputs = (0..m).map(|u| format!("u{u}")).collect();
    let initial = (0..n).filter(|_| rng.gen_bool(p.initial_probability)).collect();
    let secret = (0..n).filter(|_| rng.gen_bool(p.secret_probability)).collect();
    let mut transitions = Vec::new();
    for s in 0..n {
        for u in 0..m {
            for t in 0..n {
                if rng.gen_bool(p.edge_probability) {
                    transitions.push((s, u, t));
                }
            }
        }
    }
    MetricSystem::new(states, inputs, initial, secret, transitions)
        .expect("generated systems are valid by construction")
}
