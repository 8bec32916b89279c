//! Finite metric transition systems.
//!
//! States and inputs are interned to dense indices; every state set is a
//! fixed-width bitset over the state indices.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = usize;
pub type InputId = usize;

/// A set of states of one system, as a bitset of `|X|` bits.
pub type StateSet = FixedBitSet;

/// Distance on output vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMetric {
    /// Supremum norm of the coordinate-wise difference.
    #[default]
    Infinity,
    /// 0 when the vectors are bitwise identical, +inf otherwise.
    Discrete,
}

impl OutputMetric {
    pub fn distance(&self, y: &[f64], y2: &[f64]) -> Result<f64> {
        if y.len() != y2.len() {
            return Err(Error::Dimension {
                expected: y.len(),
                found: y2.len(),
            });
        }
        Ok(self.distance_unchecked(y, y2))
    }

    pub(crate) fn distance_unchecked(&self, y: &[f64], y2: &[f64]) -> f64 {
        match self {
            OutputMetric::Infinity => y
                .iter()
                .zip(y2)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            OutputMetric::Discrete => {
                if y.iter().zip(y2).all(|(a, b)| a.to_bits() == b.to_bits()) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// `true` iff `d(y, y2) <= delta`, compared exactly.
pub fn delta_close(metric: OutputMetric, y: &[f64], y2: &[f64], delta: f64) -> Result<bool> {
    Ok(metric.distance(y, y2)? <= delta)
}

/// The opacity notions a verifier can be asked about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpacityNotion {
    InitialState,
    CurrentState,
    /// The secret must stay hidden for `K` steps after it is visited.
    KStep(u32),
    InfiniteStep,
    /// Representable, but no decision procedure is provided.
    Pre,
}

impl fmt::Display for OpacityNotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpacityNotion::InitialState => f.write_str("initial-state"),
            OpacityNotion::CurrentState => f.write_str("current-state"),
            OpacityNotion::KStep(k) => write!(f, "k-step({k})"),
            OpacityNotion::InfiniteStep => f.write_str("infinite-step"),
            OpacityNotion::Pre => f.write_str("pre"),
        }
    }
}

impl FromStr for OpacityNotion {
    type Err = Error;

    /// Accepts `initial-state`, `current-state`, `infinite-step`, `pre`
    /// and `k-step(K)`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial-state" => Ok(OpacityNotion::InitialState),
            "current-state" => Ok(OpacityNotion::CurrentState),
            "infinite-step" => Ok(OpacityNotion::InfiniteStep),
            "pre" => Ok(OpacityNotion::Pre),
            _ => s
                .strip_prefix("k-step(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|k| k.parse().ok())
                .map(OpacityNotion::KStep)
                .ok_or_else(|| Error::Parse(format!("unknown opacity notion '{s}'"))),
        }
    }
}

/// A finite metric transition system `(X, X0, XS, U, ->, Y, H)`.
#[derive(Debug, Clone)]
pub struct MetricSystem {
    names: Vec<String>,
    index: HashMap<String, StateId>,
    inputs: Vec<String>,
    input_index: HashMap<String, InputId>,
    initial: StateSet,
    secret: StateSet,
    /// Sorted by (source, input, target), no duplicates.
    transitions: Vec<(StateId, InputId, StateId)>,
    output_dim: usize,
    outputs: Vec<Vec<f64>>,
    succ: Vec<Vec<Vec<StateId>>>,
    pred: Vec<Vec<Vec<StateId>>>,
    succ_any: Vec<StateSet>,
    pred_any: Vec<StateSet>,
}

impl MetricSystem {
    /// Builds a system from index-based parts. Duplicate transitions are
    /// collapsed; everything else that breaks an invariant is rejected.
    pub fn new(
        states: Vec<(String, Vec<f64>)>,
        inputs: Vec<String>,
        initial: Vec<StateId>,
        secret: Vec<StateId>,
        transitions: Vec<(StateId, InputId, StateId)>,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Validation("states: at least one state is required".into()));
        }
        let output_dim = states[0].1.len();
        if output_dim == 0 {
            return Err(Error::Validation(
                "states[0].output: output vector must be nonempty".into(),
            ));
        }
        let mut names = Vec::with_capacity(n);
        let mut index = HashMap::with_capacity(n);
        let mut outputs = Vec::with_capacity(n);
        for (i, (name, output)) in states.into_iter().enumerate() {
            if output.len() != output_dim {
                return Err(Error::Validation(format!(
                    "states[{i}].output: expected {output_dim} components, found {}",
                    output.len()
                )));
            }
            if let Some(bad) = output.iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "states[{i}].output: non-finite component {bad}"
                )));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Validation(format!("states[{i}]: duplicate name '{name}'")));
            }
            names.push(name);
            outputs.push(output);
        }
        let mut input_index = HashMap::with_capacity(inputs.len());
        for (i, label) in inputs.iter().enumerate() {
            if input_index.insert(label.clone(), i).is_some() {
                return Err(Error::Validation(format!("inputs[{i}]: duplicate label '{label}'")));
            }
        }
        let to_set = |ids: &[StateId], what: &str| -> Result<StateSet> {
            let mut set = StateSet::with_capacity(n);
            for (i, &s) in ids.iter().enumerate() {
                if s >= n {
                    return Err(Error::Validation(format!("{what}[{i}]: state index {s} out of range")));
                }
                set.insert(s);
            }
            Ok(set)
        };
        let initial = to_set(&initial, "initial")?;
        let secret = to_set(&secret, "secret")?;
        let m = inputs.len();
        let mut transitions = transitions;
        for (i, &(s, u, t)) in transitions.iter().enumerate() {
            if s >= n || t >= n {
                return Err(Error::Validation(format!("transitions[{i}]: state index out of range")));
            }
            if u >= m {
                return Err(Error::Validation(format!("transitions[{i}]: input index {u} out of range")));
            }
        }
        transitions.sort_unstable();
        transitions.dedup();

        let mut succ = vec![vec![Vec::new(); m]; n];
        let mut pred = vec![vec![Vec::new(); m]; n];
        let mut succ_any = vec![StateSet::with_capacity(n); n];
        let mut pred_any = vec![StateSet::with_capacity(n); n];
        for &(s, u, t) in &transitions {
            succ[s][u].push(t);
            pred[t][u].push(s);
            succ_any[s].insert(t);
            pred_any[t].insert(s);
        }
        for row in pred.iter_mut() {
            for list in row.iter_mut() {
                list.sort_unstable();
            }
        }

        Ok(MetricSystem {
            names,
            index,
            inputs,
            input_index,
            initial,
            secret,
            transitions,
            output_dim,
            outputs,
            succ,
            pred,
            succ_any,
            pred_any,
        })
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.index.get(name).copied()
    }

    pub fn input_label(&self, u: InputId) -> &str {
        &self.inputs[u]
    }

    pub fn input_id(&self, label: &str) -> Result<InputId> {
        self.input_index
            .get(label)
            .copied()
            .ok_or_else(|| Error::Input(label.to_string()))
    }

    pub fn initial(&self) -> &StateSet {
        &self.initial
    }

    pub fn secret(&self) -> &StateSet {
        &self.secret
    }

    pub fn is_initial(&self, s: StateId) -> bool {
        self.initial.contains(s)
    }

    pub fn is_secret(&self, s: StateId) -> bool {
        self.secret.contains(s)
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn output(&self, s: StateId) -> &[f64] {
        &self.outputs[s]
    }

    pub fn transitions(&self) -> &[(StateId, InputId, StateId)] {
        &self.transitions
    }

    /// Targets of `s` under input `u`, ascending.
    pub fn successors(&self, s: StateId, u: InputId) -> &[StateId] {
        &self.succ[s][u]
    }

    /// Sources reaching `s` under input `u`, ascending.
    pub fn predecessors(&self, s: StateId, u: InputId) -> &[StateId] {
        &self.pred[s][u]
    }

    /// Successors of `s` under any input.
    pub fn successors_any(&self, s: StateId) -> &StateSet {
        &self.succ_any[s]
    }

    pub fn predecessors_any(&self, s: StateId) -> &StateSet {
        &self.pred_any[s]
    }

    pub fn empty_set(&self) -> StateSet {
        StateSet::with_capacity(self.num_states())
    }

    pub fn set_of<I: IntoIterator<Item = StateId>>(&self, states: I) -> StateSet {
        let mut set = self.empty_set();
        set.extend(states);
        set
    }

    /// `Post_u(q)`: all `u`-successors of members of `q`.
    pub fn post(&self, q: &StateSet, input: &str) -> Result<StateSet> {
        let u = self.input_id(input)?;
        Ok(self.post_id(q, u))
    }

    pub fn post_id(&self, q: &StateSet, u: InputId) -> StateSet {
        let mut out = self.empty_set();
        for s in q.ones() {
            out.extend(self.succ[s][u].iter().copied());
        }
        out
    }

    /// `Pre_u(q)`: all states with a `u`-successor in `q`.
    pub fn pre(&self, q: &StateSet, input: &str) -> Result<StateSet> {
        let u = self.input_id(input)?;
        Ok(self.pre_id(q, u))
    }

    pub fn pre_id(&self, q: &StateSet, u: InputId) -> StateSet {
        let mut out = self.empty_set();
        for s in q.ones() {
            out.extend(self.pred[s][u].iter().copied());
        }
        out
    }

    /// Union of `Post_u(q)` over every input.
    pub fn post_any(&self, q: &StateSet) -> StateSet {
        let mut out = self.empty_set();
        for s in q.ones() {
            out.union_with(&self.succ_any[s]);
        }
        out
    }

    /// Union of `Pre_u(q)` over every input.
    pub fn pre_any(&self, q: &StateSet) -> StateSet {
        let mut out = self.empty_set();
        for s in q.ones() {
            out.union_with(&self.pred_any[s]);
        }
        out
    }

    /// For every state `x`, the set of states whose output is within `delta`
    /// of `H(x)`.
    pub fn closeness_balls(&self, metric: OutputMetric, delta: f64) -> Vec<StateSet> {
        let n = self.num_states();
        let mut balls = vec![self.empty_set(); n];
        for a in 0..n {
            balls[a].insert(a);
            for b in (a + 1)..n {
                if metric.distance_unchecked(&self.outputs[a], &self.outputs[b]) <= delta {
                    balls[a].insert(b);
                    balls[b].insert(a);
                }
            }
        }
        balls
    }

    /// Converts back to the file document, in canonical order.
    pub fn to_document(&self) -> SystemDocument {
        SystemDocument {
            states: self
                .names
                .iter()
                .zip(&self.outputs)
                .map(|(name, output)| StateDocument {
                    name: name.clone(),
                    output: output.clone(),
                })
                .collect(),
            inputs: self.inputs.clone(),
            initial: self.initial.ones().map(|s| self.names[s].clone()).collect(),
            secret: self.secret.ones().map(|s| self.names[s].clone()).collect(),
            transitions: self
                .transitions
                .iter()
                .map(|&(s, u, t)| {
                    (self.names[s].clone(), self.inputs[u].clone(), self.names[t].clone())
                })
                .collect(),
        }
    }

    pub fn from_document(doc: SystemDocument) -> Result<Self> {
        let mut index = HashMap::with_capacity(doc.states.len());
        for (i, st) in doc.states.iter().enumerate() {
            if index.insert(st.name.clone(), i).is_some() {
                return Err(Error::Validation(format!("states[{i}]: duplicate name '{}'", st.name)));
            }
        }
        let mut input_index = HashMap::with_capacity(doc.inputs.len());
        for (i, label) in doc.inputs.iter().enumerate() {
            input_index.entry(label.clone()).or_insert(i);
        }
        let lookup = |name: &str, at: String| -> Result<StateId> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Validation(format!("{at}: unknown state '{name}'")))
        };
        let initial = doc
            .initial
            .iter()
            .enumerate()
            .map(|(i, s)| lookup(s, format!("initial[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let secret = doc
            .secret
            .iter()
            .enumerate()
            .map(|(i, s)| lookup(s, format!("secret[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let transitions = doc
            .transitions
            .iter()
            .enumerate()
            .map(|(i, (s, u, t))| {
                let src = lookup(s, format!("transitions[{i}][0]"))?;
                let inp = input_index.get(u).copied().ok_or_else(|| {
                    Error::Validation(format!("transitions[{i}][1]: unknown input '{u}'"))
                })?;
                let dst = lookup(t, format!("transitions[{i}][2]"))?;
                Ok((src, inp, dst))
            })
            .collect::<Result<Vec<_>>>()?;
        let states = doc.states.into_iter().map(|s| (s.name, s.output)).collect();
        MetricSystem::new(states, doc.inputs, initial, secret, transitions)
    }
}

/// A run `x0 -u1-> x1 -u2-> ... xn` of a system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub states: Vec<StateId>,
    pub inputs: Vec<InputId>,
}

impl Path {
    /// Checks that every step is a transition of `sys`. The first state is
    /// not required to be initial.
    pub fn new(sys: &MetricSystem, states: Vec<StateId>, inputs: Vec<InputId>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Validation("path: at least one state is required".into()));
        }
        if inputs.len() + 1 != states.len() {
            return Err(Error::Validation(format!(
                "path: {} states need {} inputs, found {}",
                states.len(),
                states.len() - 1,
                inputs.len()
            )));
        }
        for (i, (w, &u)) in states.windows(2).zip(&inputs).enumerate() {
            if u >= sys.num_inputs() || !sys.successors(w[0], u).contains(&w[1]) {
                return Err(Error::Validation(format!("path: step {i} is not a transition")));
            }
        }
        Ok(Path { states, inputs })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// JSON form of a system file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub states: Vec<StateDocument>,
    pub inputs: Vec<String>,
    #[serde(default)]
    pub initial: Vec<String>,
    #[serde(default)]
    pub secret: Vec<String>,
    #[serde(default)]
    pub transitions: Vec<(String, String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDocument {
    pub name: String,
    pub output: Vec<f64>,
}

pub fn parse_system(text: &[u8]) -> Result<MetricSystem> {
    let doc: SystemDocument =
        serde_json::from_slice(text).map_err(|e| Error::Parse(e.to_string()))?;
    MetricSystem::from_document(doc)
}

pub fn serialize_system(sys: &MetricSystem) -> String {
    serde_json::to_string_pretty(&sys.to_document()).expect("system documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> MetricSystem {
        MetricSystem::new(
            vec![
                ("a".into(), vec![0.0]),
                ("b".into(), vec![0.5]),
                ("c".into(), vec![1.0]),
            ],
            vec!["u".into(), "v".into()],
            vec![0],
            vec![2],
            vec![(0, 0, 1), (1, 0, 2), (1, 1, 0), (0, 0, 1)],
        )
        .unwrap()
    }

    #[test]
    fn duplicate_transitions_collapse() {
        assert_eq!(chain().transitions().len(), 3);
    }

    #[test]
    fn post_and_pre_of_empty_set_are_empty() {
        let sys = chain();
        let empty = sys.empty_set();
        assert_eq!(sys.post(&empty, "u").unwrap().count_ones(..), 0);
        assert_eq!(sys.pre(&empty, "v").unwrap().count_ones(..), 0);
    }

    #[test]
    fn unknown_input_is_rejected() {
        let sys = chain();
        let q = sys.set_of([0]);
        assert!(matches!(sys.post(&q, "w"), Err(Error::Input(_))));
        assert!(matches!(sys.pre(&q, "w"), Err(Error::Input(_))));
    }

    #[test]
    fn delta_close_examples() {
        let m = OutputMetric::Infinity;
        assert!(delta_close(m, &[1.0, 2.0], &[1.0, 2.0], 0.0).unwrap());
        assert!(delta_close(m, &[0.30], &[0.25], 0.1).unwrap());
        assert!(!delta_close(m, &[0.30], &[0.25], 0.04).unwrap());
        assert!(matches!(
            delta_close(m, &[0.0], &[0.0, 1.0], 1.0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn empty_state_list_is_invalid() {
        let err = parse_system(br#"{"states": [], "inputs": []}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_system(b"{\"states\": [\n  {\"name\": 3}]}").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_state_and_bad_arity_are_validation_errors() {
        let dangling = br#"{"states":[{"name":"a","output":[0]}],"inputs":["u"],
            "transitions":[["a","u","zz"]]}"#;
        match parse_system(dangling).unwrap_err() {
            Error::Validation(msg) => assert!(msg.starts_with("transitions[0][2]"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let arity = br#"{"states":[{"name":"a","output":[0]},{"name":"b","output":[0,1]}],
            "inputs":[]}"#;
        match parse_system(arity).unwrap_err() {
            Error::Validation(msg) => assert!(msg.starts_with("states[1].output"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_initial_set_is_legal() {
        let sys = parse_system(br#"{"states":[{"name":"a","output":[0]}],"inputs":[]}"#).unwrap();
        assert_eq!(sys.initial().count_ones(..), 0);
    }

    #[test]
    fn notion_round_trips_through_text() {
        for notion in [
            OpacityNotion::InitialState,
            OpacityNotion::CurrentState,
            OpacityNotion::KStep(3),
            OpacityNotion::InfiniteStep,
            OpacityNotion::Pre,
        ] {
            assert_eq!(notion.to_string().parse::<OpacityNotion>().unwrap(), notion);
        }
        assert!("k-step(x)".parse::<OpacityNotion>().is_err());
    }

    #[test]
    fn path_validation() {
        let sys = chain();
        assert!(Path::new(&sys, vec![0, 1, 2], vec![0, 0]).is_ok());
        assert!(Path::new(&sys, vec![0, 2], vec![0]).is_err());
        assert!(Path::new(&sys, vec![0, 1], vec![]).is_err());
    }
}
