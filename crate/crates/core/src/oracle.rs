//! Definition-level opacity checking, used as an independent oracle.
//!
//! Every notion is phrased the same way: at some instant `n` where the run is
//! secret, the candidate set of δ-matching runs that are *not* secret at `n`
//! is opened as a "watch". The watch is advanced together with the run; if it
//! ever becomes empty while the notion still cares about instant `n`, the
//! secret is revealed. Search states are memoized on the current state, the
//! set of all matching states, and the open watches, so the exploration is
//! finite.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::observer::{check_delta, ObserverConfig};
use crate::system::{InputId, MetricSystem, OpacityNotion, OutputMetric, Path, StateId, StateSet};
use crate::verdict::{Verdict, Witness};

#[derive(Debug, Clone)]
pub struct OracleVerdict {
    pub verdict: Verdict,
    /// Distinct memoized search states discovered.
    pub classes: usize,
    /// Longest path length explored (in steps).
    pub explored_depth: usize,
    /// `true` when the search closed before hitting the depth bound, in which
    /// case the verdict is exact.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct SearchKey {
    state: StateId,
    matching: StateSet,
    /// Open watches with their age, sorted, one entry per distinct set.
    watches: Vec<(StateSet, u32)>,
}

#[derive(Clone, Copy)]
struct Policy {
    /// Open a watch at every secret instant (otherwise only at instant 0).
    every_instant: bool,
    /// Largest age at which an empty watch still counts as a revelation.
    horizon: Option<u32>,
    /// Whether the set of all matching states must be tracked.
    track_matching: bool,
}

impl Policy {
    fn for_notion(notion: OpacityNotion) -> Result<Self> {
        Ok(match notion {
            OpacityNotion::InitialState => Policy {
                every_instant: false,
                horizon: None,
                track_matching: false,
            },
            OpacityNotion::CurrentState => Policy {
                every_instant: true,
                horizon: Some(0),
                track_matching: true,
            },
            OpacityNotion::KStep(k) => Policy {
                every_instant: true,
                horizon: Some(k),
                track_matching: true,
            },
            OpacityNotion::InfiniteStep => Policy {
                every_instant: true,
                horizon: None,
                track_matching: true,
            },
            OpacityNotion::Pre => {
                return Err(Error::NotImplemented("pre-opacity verification".into()))
            }
        })
    }

    fn alive(&self, age: u32) -> bool {
        self.horizon.map_or(true, |h| age <= h)
    }

    /// Without a horizon ages are not needed and are kept at 0, which keeps
    /// the search space finite.
    fn older(&self, age: u32) -> u32 {
        if self.horizon.is_some() {
            age + 1
        } else {
            0
        }
    }
}

/// Breadth-first search over memoized (state, matching set, watches) classes,
/// exploring paths of at most `depth` steps.
pub fn brute_force_opacity(
    sys: &MetricSystem,
    delta: f64,
    notion: OpacityNotion,
    depth: usize,
    config: &ObserverConfig,
) -> Result<OracleVerdict> {
    check_delta(delta)?;
    let policy = Policy::for_notion(notion)?;
    if sys.secret().is_clear() {
        return Ok(OracleVerdict {
            verdict: Verdict::Opaque,
            classes: 0,
            explored_depth: 0,
            exhaustive: true,
        });
    }
    let balls = sys.closeness_balls(config.metric, delta);
    let mut non_secret = sys.secret().clone();
    non_secret.toggle_range(..);

    let mut keys: Vec<SearchKey> = Vec::new();
    let mut parent: Vec<Option<(usize, InputId)>> = Vec::new();
    let mut level: Vec<usize> = Vec::new();
    let mut index: HashMap<SearchKey, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut exhaustive = true;
    let mut explored_depth = 0;

    let reveal = |keys: &[SearchKey],
                  parent: &[Option<(usize, InputId)>],
                  at: usize,
                  tail: (InputId, StateId),
                  age: u32| {
        let mut path = trace(keys, parent, at);
        path.inputs.push(tail.0);
        path.states.push(tail.1);
        let reveal_instant = if policy.horizon.is_some() {
            path.len() - 1 - age as usize
        } else {
            earliest_reveal(sys, &balls, &path)
                .expect("an emptied watch implies a revealed instant on the path")
        };
        Verdict::NotOpaque(Witness { path, reveal_instant })
    };

    for x0 in sys.initial().ones() {
        let mut matching = sys.initial().clone();
        matching.intersect_with(&balls[x0]);
        let mut watches = Vec::new();
        if sys.is_secret(x0) {
            let mut watch = matching.clone();
            watch.intersect_with(&non_secret);
            if watch.is_clear() {
                return Ok(OracleVerdict {
                    verdict: Verdict::NotOpaque(Witness {
                        path: Path { states: vec![x0], inputs: vec![] },
                        reveal_instant: 0,
                    }),
                    classes: keys.len() + 1,
                    explored_depth: 0,
                    exhaustive,
                });
            }
            if policy.alive(0) {
                watches.push((watch, 0));
            }
        }
        if !policy.track_matching {
            if watches.is_empty() {
                continue;
            }
            matching.clear();
        }
        let key = SearchKey { state: x0, matching, watches };
        if let Entry::Vacant(e) = index.entry(key) {
            let id = keys.len();
            keys.push(e.key().clone());
            e.insert(id);
            parent.push(None);
            level.push(0);
            queue.push_back(id);
        }
    }

    while let Some(i) = queue.pop_front() {
        if level[i] >= depth {
            exhaustive = false;
            continue;
        }
        let current = keys[i].clone();
        for u in 0..sys.num_inputs() {
            for &next in sys.successors(current.state, u) {
                let mut watches: Vec<(StateSet, u32)> = Vec::new();
                for (w, age) in &current.watches {
                    let age = policy.older(*age);
                    if !policy.alive(age) {
                        continue;
                    }
                    let mut advanced = sys.post_any(w);
                    advanced.intersect_with(&balls[next]);
                    if advanced.is_clear() {
                        return Ok(OracleVerdict {
                            verdict: reveal(&keys, &parent, i, (u, next), age),
                            classes: keys.len(),
                            explored_depth: level[i] + 1,
                            exhaustive,
                        });
                    }
                    watches.push((advanced, age));
                }
                let mut matching = if policy.track_matching {
                    let mut m = sys.post_any(&current.matching);
                    m.intersect_with(&balls[next]);
                    m
                } else {
                    sys.empty_set()
                };
                if policy.every_instant && sys.is_secret(next) {
                    let mut watch = matching.clone();
                    watch.intersect_with(&non_secret);
                    if watch.is_clear() {
                        return Ok(OracleVerdict {
                            verdict: reveal(&keys, &parent, i, (u, next), 0),
                            classes: keys.len(),
                            explored_depth: level[i] + 1,
                            exhaustive,
                        });
                    }
                    if policy.alive(0) {
                        watches.push((watch, 0));
                    }
                }
                if !policy.track_matching && watches.is_empty() {
                    continue;
                }
                if !policy.track_matching {
                    matching.clear();
                }
                normalize(&mut watches);
                let key = SearchKey { state: next, matching, watches };
                if let Entry::Vacant(e) = index.entry(key) {
                    let id = keys.len();
                    if id >= config.cap {
                        return Err(Error::Resource { what: "oracle search states", cap: config.cap });
                    }
                    keys.push(e.key().clone());
                    e.insert(id);
                    parent.push(Some((i, u)));
                    level.push(level[i] + 1);
                    explored_depth = explored_depth.max(level[i] + 1);
                    queue.push_back(id);
                }
            }
        }
    }

    let verdict = if exhaustive {
        Verdict::Opaque
    } else {
        Verdict::Inconclusive(format!("no revelation within {depth} steps"))
    };
    Ok(OracleVerdict {
        verdict,
        classes: keys.len(),
        explored_depth,
        exhaustive,
    })
}

/// A watch is redundant when another one is a subset of it and no older:
/// the smaller set empties no later and stays within the horizon as long.
fn normalize(watches: &mut Vec<(StateSet, u32)>) {
    watches.sort_by(|a, b| {
        a.0.count_ones(..)
            .cmp(&b.0.count_ones(..))
            .then_with(|| a.0.ones().cmp(b.0.ones()))
            .then(a.1.cmp(&b.1))
    });
    let mut kept: Vec<(StateSet, u32)> = Vec::with_capacity(watches.len());
    for (w, age) in watches.drain(..) {
        if !kept.iter().any(|(k, a)| *a <= age && k.is_subset(&w)) {
            kept.push((w, age));
        }
    }
    *watches = kept;
}

/// First secret instant of `path` at which no δ-matching run is non-secret.
fn earliest_reveal(sys: &MetricSystem, balls: &[StateSet], path: &Path) -> Option<usize> {
    (0..path.len())
        .filter(|&n| sys.is_secret(path.states[n]))
        .find(|&n| matching_escapes(sys, balls, path, n).is_clear())
}

/// States at the end of `path` reachable by δ-matching runs that are not
/// secret at instant `n`.
fn matching_escapes(sys: &MetricSystem, balls: &[StateSet], path: &Path, n: usize) -> StateSet {
    let mut candidates = sys.initial().clone();
    candidates.intersect_with(&balls[path.states[0]]);
    for (t, &x) in path.states.iter().enumerate() {
        if t > 0 {
            candidates = sys.post_any(&candidates);
            candidates.intersect_with(&balls[x]);
        }
        if t == n {
            candidates.difference_with(sys.secret());
        }
    }
    candidates
}

fn trace(keys: &[SearchKey], parent: &[Option<(usize, InputId)>], at: usize) -> Path {
    let mut states = vec![keys[at].state];
    let mut inputs = Vec::new();
    let mut i = at;
    while let Some((p, u)) = parent[i] {
        states.push(keys[p].state);
        inputs.push(u);
        i = p;
    }
    states.reverse();
    inputs.reverse();
    Path { states, inputs }
}

/// Replays a witness against the definition: the path must be a run from an
/// initial state that is secret at the reveal instant, within the notion's
/// delay, and no δ-matching run may be non-secret at that instant.
pub fn confirm_witness(
    sys: &MetricSystem,
    delta: f64,
    metric: OutputMetric,
    notion: OpacityNotion,
    witness: &Witness,
) -> bool {
    let path = &witness.path;
    if Path::new(sys, path.states.clone(), path.inputs.clone()).is_err() {
        return false;
    }
    let n = witness.reveal_instant;
    let last = path.len() - 1;
    let within_notion = match notion {
        OpacityNotion::InitialState => n == 0,
        OpacityNotion::CurrentState => n == last,
        OpacityNotion::KStep(k) => n <= last && last - n <= k as usize,
        OpacityNotion::InfiniteStep => n <= last,
        OpacityNotion::Pre => false,
    };
    if !within_notion || !sys.is_initial(path.states[0]) || !sys.is_secret(path.states[n]) {
        return false;
    }
    let close = |a: StateId, b: StateId| metric.distance_unchecked(sys.output(a), sys.output(b)) <= delta;
    let mut candidates = sys.set_of(sys.initial().ones().filter(|&s| close(s, path.states[0])));
    for t in 0..=last {
        if t > 0 {
            let next = sys.post_any(&candidates);
            candidates = sys.set_of(next.ones().filter(|&s| close(s, path.states[t])));
        }
        if t == n {
            candidates.difference_with(sys.secret());
        }
        if candidates.is_clear() {
            return true;
        }
    }
    false
}
