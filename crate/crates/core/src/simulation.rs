//! ε-approximate initial-state opacity preserving (InitSOP) simulation
//! relations between finite metric systems.
//!
//! Conditions on a relation `R ⊆ X × X̂`:
//! - 1a: every secret initial state is related to a secret initial abstract state;
//! - 1b: every non-secret initial abstract state is related to a non-secret
//!   initial concrete state;
//! - 2: related states have outputs within ε;
//! - 3a/3b: every step of one side is matched by a step of the other that
//!   lands in `R`.

use std::str::FromStr;
use std::time::Instant;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observer::{check_delta, verify_state_opacity, ObserverConfig};
use crate::system::{MetricSystem, OpacityNotion, OutputMetric, StateId};
use crate::verdict::{Stats, Verdict, Verification};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "1a")]
    InitialSecret,
    #[serde(rename = "1b")]
    InitialPublic,
    #[serde(rename = "2")]
    Output,
    #[serde(rename = "3a")]
    ConcreteStep,
    #[serde(rename = "3b")]
    AbstractStep,
    /// Condition 1 holds vacuously but no pair survived.
    #[serde(rename = "empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRelation {
    pub epsilon: f64,
    /// Sorted `(concrete, abstract)` pairs.
    pub pairs: Vec<(StateId, StateId)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Failure {
    pub condition: Condition,
    pub concrete_state: Option<StateId>,
    pub abstract_state: Option<StateId>,
}

/// One pair removed during pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pruned {
    pub pair: (StateId, StateId),
    pub condition: Condition,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub related: bool,
    /// The greatest relation satisfying conditions 2 and 3, when nonempty.
    pub relation: Option<SimRelation>,
    pub failure: Option<Failure>,
    pub pruned: Vec<Pruned>,
}

/// Dense `|X| × |X̂|` relation.
#[derive(Debug, Clone)]
struct Matrix {
    rows: Vec<FixedBitSet>,
}

impl Matrix {
    fn contains(&self, x: StateId, xh: StateId) -> bool {
        self.rows[x].contains(xh)
    }

    fn pairs(&self) -> Vec<(StateId, StateId)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.ones().map(move |xh| (x, xh)))
            .collect()
    }

    fn columns(&self, na: usize) -> Vec<FixedBitSet> {
        let mut cols = vec![FixedBitSet::with_capacity(self.rows.len()); na];
        for (x, row) in self.rows.iter().enumerate() {
            for xh in row.ones() {
                cols[xh].insert(x);
            }
        }
        cols
    }
}

fn check_dims(concrete: &MetricSystem, abstract_sys: &MetricSystem) -> Result<()> {
    if concrete.output_dim() != abstract_sys.output_dim() {
        return Err(Error::Dimension {
            expected: concrete.output_dim(),
            found: abstract_sys.output_dim(),
        });
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::Validation(format!("epsilon must be a nonnegative number, got {epsilon}")));
    }
    Ok(())
}

/// Which step condition, if any, `(x, xh)` violates against `r`.
fn step_violation(
    concrete: &MetricSystem,
    abstract_sys: &MetricSystem,
    r: &Matrix,
    cols: &[FixedBitSet],
    x: StateId,
    xh: StateId,
) -> Option<Condition> {
    let succ_h = abstract_sys.successors_any(xh);
    if concrete.successors_any(x).ones().any(|x2| r.rows[x2].is_disjoint(succ_h)) {
        return Some(Condition::ConcreteStep);
    }
    let succ = concrete.successors_any(x);
    if abstract_sys.successors_any(xh).ones().any(|xh2| cols[xh2].is_disjoint(succ)) {
        return Some(Condition::AbstractStep);
    }
    None
}

fn initial_violation(
    concrete: &MetricSystem,
    abstract_sys: &MetricSystem,
    r: &Matrix,
) -> Option<Failure> {
    let mut secret_init_h = abstract_sys.initial().clone();
    secret_init_h.intersect_with(abstract_sys.secret());
    for x0 in concrete.initial().ones().filter(|&x| concrete.is_secret(x)) {
        if r.rows[x0].is_disjoint(&secret_init_h) {
            return Some(Failure {
                condition: Condition::InitialSecret,
                concrete_state: Some(x0),
                abstract_state: None,
            });
        }
    }
    let mut public_init = concrete.initial().clone();
    public_init.difference_with(concrete.secret());
    for xh0 in abstract_sys.initial().ones().filter(|&x| !abstract_sys.is_secret(x)) {
        if !public_init.ones().any(|x0| r.contains(x0, xh0)) {
            return Some(Failure {
                condition: Condition::InitialPublic,
                concrete_state: None,
                abstract_state: Some(xh0),
            });
        }
    }
    None
}

/// Greatest fixpoint of conditions 2 and 3, then condition 1.
///
/// Each round evaluates every surviving pair against the relation as it was
/// at the start of the round and removes all violators at once, so the
/// result and the pruning log do not depend on evaluation order.
pub fn max_initsop_relation(
    concrete: &MetricSystem,
    abstract_sys: &MetricSystem,
    epsilon: f64,
) -> Result<SimReport> {
    max_initsop_relation_with(concrete, abstract_sys, epsilon, OutputMetric::Infinity)
}

pub fn max_initsop_relation_with(
    concrete: &MetricSystem,
    abstract_sys: &MetricSystem,
    epsilon: f64,
    metric: OutputMetric,
) -> Result<SimReport> {
    check_dims(concrete, abstract_sys)?;
    check_epsilon(epsilon)?;
    let (nc, na) = (concrete.num_states(), abstract_sys.num_states());
    let mut r = Matrix {
        rows: (0..nc)
            .map(|x| {
                let mut row = FixedBitSet::with_capacity(na);
                row.extend((0..na).filter(|&xh| {
                    metric.distance_unchecked(concrete.output(x), abstract_sys.output(xh)) <= epsilon
                }));
                row
            })
            .collect(),
    };

    let mut pruned = Vec::new();
    for round in 0.. {
        let cols = r.columns(na);
        let pairs = r.pairs();
        let removed: Vec<Pruned> = pairs
            .par_iter()
            .filter_map(|&(x, xh)| {
                step_violation(concrete, abstract_sys, &r, &cols, x, xh).map(|condition| Pruned {
                    pair: (x, xh),
                    condition,
                    round,
                })
            })
            .collect();
        if removed.is_empty() {
            break;
        }
        for p in &removed {
            r.rows[p.pair.0].set(p.pair.1, false);
        }
        pruned.extend(removed);
    }

    let pairs = r.pairs();
    let failure = initial_violation(concrete, abstract_sys, &r).or_else(|| {
        pairs.is_empty().then_some(Failure {
            condition: Condition::Empty,
            concrete_state: None,
            abstract_state: None,
        })
    });
    let relation = (!pairs.is_empty()).then(|| SimRelation { epsilon, pairs });
    Ok(SimReport {
        related: failure.is_none(),
        relation,
        failure,
        pruned,
    })
}

/// Checks a given relation against all conditions. Returns the first
/// violation found, scanning conditions in the order 1a, 1b, 2, 3a, 3b and
/// pairs in ascending order.
pub fn check_relation(
    concrete: &MetricSystem,
    abstract_sys: &MetricSystem,
    epsilon: f64,
    pairs: &[(StateId, StateId)],
) -> Result<Option<Failure>> {
    let r = matrix_of(concrete, abstract_sys, pairs)?;
    if let Some(f) = initial_violation(concrete, abstract_sys, &r) {
        return Ok(Some(f));
    }
    check_closure(concrete, abstract_sys, epsilon, pairs)
}

/// Checks conditions 2, 3a and 3b only.
pub fn check_closure(
    concrete: &MetricSystem,
    abstract_sys: &MetricSystem,
    epsilon: f64,
    pairs: &[(StateId, StateId)],
) -> Result<Option<Failure>> {
    let r = matrix_of(concrete, abstract_sys, pairs)?;
    let pairs = r.pairs();
    for &(x, xh) in &pairs {
        let d = OutputMetric::Infinity.distance_unchecked(concrete.output(x), abstract_sys.output(xh));
        if d > epsilon {
            return Ok(Some(Failure {
                condition: Condition::Output,
                concrete_state: Some(x),
                abstract_state: Some(xh),
            }));
        }
    }
    let cols = r.columns(abstract_sys.num_states());
    for &(x, xh) in &pairs {
        if let Some(condition) = step_violation(concrete, abstract_sys, &r, &cols, x, xh) {
            return Ok(Some(Failure {
                condition,
                concrete_state: Some(x),
                abstract_state: Some(xh),
            }));
        }
    }
    Ok(None)
}

fn matrix_of(
    concrete: &MetricSystem,
    abstract_sys: &MetricSystem,
    pairs: &[(StateId, StateId)],
) -> Result<Matrix> {
    check_dims(concrete, abstract_sys)?;
    let (nc, na) = (concrete.num_states(), abstract_sys.num_states());
    let mut r = Matrix { rows: vec![FixedBitSet::with_capacity(na); nc] };
    for &(x, xh) in pairs {
        if x >= nc || xh >= na {
            return Err(Error::Validation(format!("relation pair ({x}, {xh}) is out of range")));
        }
        r.rows[x].insert(xh);
    }
    Ok(r)
}

/// `delta − 2·epsilon` computed on the shortest decimal representations of
/// the inputs, so that e.g. 0.3 − 2·0.1 is exactly 0.1.
pub fn abstract_level(epsilon: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_epsilon(epsilon)?;
    let dec = |v: f64| Decimal::from_str(&v.to_string()).ok();
    match (dec(epsilon), dec(delta)) {
        (Some(e), Some(d)) => {
            let level = d - e - e;
            if level.is_sign_negative() && !level.is_zero() {
                return Err(Error::Precision { epsilon, delta });
            }
            level
                .to_f64()
                .ok_or_else(|| Error::Internal(format!("cannot represent {level} as f64")))
        }
        _ => {
            if 2.0 * epsilon > delta {
                return Err(Error::Precision { epsilon, delta });
            }
            Ok(delta - 2.0 * epsilon)
        }
    }
}

#[derive(Debug, Clone)]
pub struct AbstractionVerdict {
    /// Opaque or inconclusive; never not-opaque.
    pub verification: Verification,
    /// Precision at which the abstraction was verified.
    pub abstract_delta: f64,
    pub relation: SimReport,
    pub abstract_verdict: Option<Verification>,
}

/// Lifts initial-state opacity from the abstraction: if the concrete system
/// is ε-InitSOP simulated by the abstraction and the abstraction is
/// (δ−2ε)-approximately initial-state opaque, the concrete system is
/// δ-approximately initial-state opaque. Anything else is inconclusive.
pub fn opacity_via_abstraction(
    concrete: &MetricSystem,
    abstract_sys: &MetricSystem,
    epsilon: f64,
    delta: f64,
    config: &ObserverConfig,
) -> Result<AbstractionVerdict> {
    let start = Instant::now();
    let level = abstract_level(epsilon, delta)?;
    let relation = max_initsop_relation_with(concrete, abstract_sys, epsilon, config.metric)?;
    let mut stats = Stats::default();
    let (verdict, abstract_verdict) = if let Some(f) = relation.failure {
        (Verdict::Inconclusive(format!("no {epsilon}-InitSOP relation: condition {} fails", condition_tag(f.condition))), None)
    } else {
        let v = verify_state_opacity(abstract_sys, level, OpacityNotion::InitialState, config)?;
        stats.observer_states = v.stats.observer_states;
        stats.transitions = v.stats.transitions;
        let verdict = match v.verdict {
            Verdict::Opaque => Verdict::Opaque,
            _ => Verdict::Inconclusive(format!("abstraction is not {level}-approximately initial-state opaque")),
        };
        (verdict, Some(v))
    };
    stats.wall_ms = start.elapsed().as_millis() as u64;
    Ok(AbstractionVerdict {
        verification: Verification {
            notion: OpacityNotion::InitialState,
            delta,
            verdict,
            stats,
        },
        abstract_delta: level,
        relation,
        abstract_verdict,
    })
}

pub fn condition_tag(c: Condition) -> &'static str {
    match c {
        Condition::InitialSecret => "1a",
        Condition::InitialPublic => "1b",
        Condition::Output => "2",
        Condition::ConcreteStep => "3a",
        Condition::AbstractStep => "3b",
        Condition::Empty => "empty",
    }
}

/// JSON form of a [`SimReport`] with state names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReportDocument {
    pub related: bool,
    pub epsilon: f64,
    pub pairs: Vec<(String, String)>,
    pub failure: Option<FailureDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureDocument {
    pub condition: Condition,
    pub concrete_state: Option<String>,
    pub abstract_state: Option<String>,
}

impl SimReport {
    pub fn document(
        &self,
        concrete: &MetricSystem,
        abstract_sys: &MetricSystem,
        epsilon: f64,
    ) -> SimReportDocument {
        SimReportDocument {
            related: self.related,
            epsilon,
            pairs: self
                .relation
                .iter()
                .flat_map(|r| &r.pairs)
                .map(|&(x, xh)| {
                    (concrete.state_name(x).to_string(), abstract_sys.state_name(xh).to_string())
                })
                .collect(),
            failure: self.failure.map(|f| FailureDocument {
                condition: f.condition,
                concrete_state: f.concrete_state.map(|s| concrete.state_name(s).to_string()),
                abstract_state: f.abstract_state.map(|s| abstract_sys.state_name(s).to_string()),
            }),
        }
    }
}
