//! Verdicts, counterexample witnesses and the JSON verdict report.

use serde::{Deserialize, Serialize};

use crate::system::{MetricSystem, OpacityNotion, Path};

/// A secret run together with the instant whose secrecy it exposes.
///
/// For initial-state opacity the instant is 0; for current-state opacity it
/// is the last instant of the path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub path: Path,
    pub reveal_instant: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Opaque,
    NotOpaque(Witness),
    /// A sufficient condition did not apply; nothing is claimed either way.
    Inconclusive(String),
}

impl Verdict {
    /// `Some(opaque)` for decided verdicts, `None` when inconclusive.
    pub fn opaque(&self) -> Option<bool> {
        match self {
            Verdict::Opaque => Some(true),
            Verdict::NotOpaque(_) => Some(false),
            Verdict::Inconclusive(_) => None,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::NotOpaque(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub observer_states: usize,
    pub transitions: usize,
    pub wall_ms: u64,
}

/// Result of one verification run.
#[derive(Debug, Clone)]
pub struct Verification {
    pub notion: OpacityNotion,
    pub delta: f64,
    pub verdict: Verdict,
    pub stats: Stats,
}

impl Verification {
    pub fn report(&self, sys: &MetricSystem) -> VerdictReport {
        let (status, reason) = match &self.verdict {
            Verdict::Opaque => ("opaque", None),
            Verdict::NotOpaque(_) => ("not-opaque", None),
            Verdict::Inconclusive(why) => ("inconclusive", Some(why.clone())),
        };
        VerdictReport {
            status: status.to_string(),
            opaque: self.verdict.opaque(),
            notion: self.notion.to_string(),
            delta: self.delta,
            witness: self.verdict.witness().map(|w| WitnessReport::new(sys, w)),
            reason,
            stats: self.stats,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub status: String,
    pub opaque: Option<bool>,
    pub notion: String,
    pub delta: f64,
    pub witness: Option<WitnessReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub reveal_instant: usize,
}

impl WitnessReport {
    pub fn new(sys: &MetricSystem, w: &Witness) -> Self {
        WitnessReport {
            states: w.path.states.iter().map(|&s| sys.state_name(s).to_string()).collect(),
            inputs: w.path.inputs.iter().map(|&u| sys.input_label(u).to_string()).collect(),
            reveal_instant: w.reveal_instant,
        }
    }
}
