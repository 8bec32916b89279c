//! Graphviz export of observers and estimators.

use std::fmt::Write;

use crate::estimator::Estimator;
use crate::observer::Observer;
use crate::system::{MetricSystem, OpacityNotion};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Nodes are labeled `ref | {(xi,xc), ...}`; states that reveal the secret
/// for `notion` are drawn as double circles.
pub fn observer_to_dot(sys: &MetricSystem, obs: &Observer, notion: OpacityNotion) -> String {
    let mut out = String::from("digraph observer {\n  rankdir=LR;\n  node [shape=circle];\n");
    for i in 0..obs.num_states() {
        let pairs: Vec<String> = obs
            .pairs_of(i)
            .into_iter()
            .map(|(a, b)| format!("({},{})", sys.state_name(a), sys.state_name(b)))
            .collect();
        let label = format!("{} | {{{}}}", sys.state_name(obs.state(i).reference), pairs.join(","));
        let shape = if obs.reveals(sys, i, notion) { ", shape=doublecircle" } else { "" };
        writeln!(out, "  q{i} [label=\"{}\"{shape}];", escape(&label)).unwrap();
    }
    for i in obs.initial() {
        writeln!(out, "  init{i} [shape=point];\n  init{i} -> q{i};").unwrap();
    }
    for &(a, u, b) in obs.transitions() {
        writeln!(out, "  q{a} -> q{b} [label=\"{}\"];", escape(sys.input_label(u))).unwrap();
    }
    out.push_str("}\n");
    out
}

/// Nodes are labeled `ref | {estimate}`; initial-state revealing nodes are
/// drawn as double circles.
pub fn estimator_to_dot(sys: &MetricSystem, est: &Estimator) -> String {
    let mut out = String::from("digraph estimator {\n  rankdir=LR;\n  node [shape=circle];\n");
    for i in 0..est.num_states() {
        let st = est.state(i);
        let members: Vec<&str> = st.estimate.ones().map(|s| sys.state_name(s)).collect();
        let label = format!("{} | {{{}}}", sys.state_name(st.reference), members.join(","));
        let shape = if est.reveals_initial(sys, i) { ", shape=doublecircle" } else { "" };
        writeln!(out, "  e{i} [label=\"{}\"{shape}];", escape(&label)).unwrap();
    }
    for &(a, u, b) in est.transitions() {
        writeln!(out, "  e{a} -> e{b} [label=\"{}\"];", escape(sys.input_label(u))).unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::{build_observer, ObserverConfig};

    #[test]
    fn revealing_node_is_double_circled() {
        let sys = MetricSystem::new(
            vec![("s0".into(), vec![0.0]), ("s1".into(), vec![1.0])],
            vec!["u".into()],
            vec![0, 1],
            vec![0],
            vec![(0, 0, 1)],
        )
        .unwrap();
        let obs = build_observer(&sys, 0.0, &ObserverConfig::default()).unwrap();
        let dot = observer_to_dot(&sys, &obs, OpacityNotion::InitialState);
        assert!(dot.contains("q0 [label=\"s0 | {(s0,s0)}\", shape=doublecircle];"));
        assert!(dot.contains("q1 [label=\"s1 | {(s1,s1)}\"];"));
        assert!(dot.contains("q0 -> q2 [label=\"u\"];"));
    }
}
