//! Sampled checking of candidate barrier certificates on the augmented
//! system `Σ × Σ`.
//!
//! A check either finds a concrete violation (`Falsified`) or reports that
//! every sample satisfied its condition (`SamplePassed`). The latter is not
//! a proof: only the grid points were examined.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::boxes::{grid_indices, lattice_point, BoxSet};
use crate::control::DtControlSystem;
use crate::error::{Error, Result};
use crate::observer::DEFAULT_STATE_CAP;
use crate::polynomial::Evaluator;
use crate::system::OutputMetric;

pub const DEFAULT_MARGIN: f64 = 1e-9;

/// Violations kept verbatim in a report; the total is always counted.
pub const MAX_REPORTED_VIOLATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Grid step on the state set.
    pub resolution: f64,
    /// Grid step on the input set; the state resolution when `None`.
    pub input_step: Option<f64>,
    /// Strict inequalities `v > 0` are checked as `v > margin`.
    pub margin: f64,
    /// Upper bound on the number of augmented samples.
    pub cap: usize,
}

impl BarrierOptions {
    pub fn new(resolution: f64) -> Self {
        BarrierOptions { resolution, input_step: None, margin: DEFAULT_MARGIN, cap: DEFAULT_STATE_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierKind {
    Opacity,
    Lack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierCondition {
    /// `≤ 0` on `R₀`.
    Initial,
    /// `> 0` on `Rᵤ`.
    Unsafe,
    /// `> 0` on the boundary ring of `X × X` away from `Rᵤ`.
    Boundary,
    /// The one-step decrease condition.
    Decrease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Falsified,
    /// Every sample satisfied its condition. Non-conclusive.
    SamplePassed,
}

/// Grid samples of the augmented regions. Pairs index into `points`.
#[derive(Debug, Clone)]
pub struct AugmentedRegions {
    pub resolution: f64,
    pub points: Vec<Vec<f64>>,
    pub r0: Vec<(usize, usize)>,
    pub ru: Vec<(usize, usize)>,
    pub r: Vec<(usize, usize)>,
    /// Outermost ring of `X × X` with `‖H(x) − H(x̂)‖ < δ`.
    pub ring: Vec<(usize, usize)>,
    /// Samples of the closure of `R ∖ Rᵤ`.
    pub closure: Vec<(usize, usize)>,
}

/// Samples `R = X × X`, `R₀ = {(x, x̂) ∈ (X₀∩X_S) × (X₀∖X_S) : ‖H(x) − H(x̂)‖ ≤ δ}`
/// and `Rᵤ = {‖H(x) − H(x̂)‖ > δ}` on the lattice of step `resolution`.
pub fn augmented_regions(sys: &DtControlSystem, delta: f64, resolution: f64, cap: usize) -> Result<AugmentedRegions> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Validation(format!("delta must be a nonnegative real, got {delta}")));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::Quantization(format!("resolution must be positive, got {resolution}")));
    }
    let lattice = |set: &BoxSet, name: &str| -> Result<HashSet<Vec<i64>>> {
        match grid_indices(set, resolution, cap) {
            Err(Error::Quantization(msg)) => Err(Error::Quantization(format!("{name}: {msg}"))),
            r => Ok(r?.into_iter().collect()),
        }
    };
    let states = grid_indices(&sys.state_box, resolution, cap)?;
    let initial = lattice(&sys.initial_box, "initial_box")?;
    let secret = lattice(&sys.secret_box, "secret_box")?;
    let n = states.len();
    if (n as u128) * (n as u128) > cap as u128 {
        return Err(Error::Resource { what: "augmented samples", cap });
    }
    let all: HashSet<&[i64]> = states.iter().map(Vec::as_slice).collect();
    let on_ring: Vec<bool> = states
        .iter()
        .map(|k| {
            (0..k.len()).any(|axis| {
                [-1, 1].iter().any(|d| {
                    let mut nb = k.clone();
                    nb[axis] += d;
                    !all.contains(nb.as_slice())
                })
            })
        })
        .collect();
    let points: Vec<Vec<f64>> = states.iter().map(|k| lattice_point(k, resolution)).collect();
    let outputs: Vec<Vec<f64>> = points.iter().map(|x| sys.observe(x)).collect();
    let in_secret_initial: Vec<bool> = states.iter().map(|k| initial.contains(k) && secret.contains(k)).collect();
    let in_public_initial: Vec<bool> = states.iter().map(|k| initial.contains(k) && !secret.contains(k)).collect();

    let mut regions = AugmentedRegions {
        resolution,
        points,
        r0: Vec::new(),
        ru: Vec::new(),
        r: Vec::with_capacity(n * n),
        ring: Vec::new(),
        closure: Vec::new(),
    };
    for p in 0..n {
        for q in 0..n {
            let d = OutputMetric::Infinity.distance_unchecked(&outputs[p], &outputs[q]);
            regions.r.push((p, q));
            if d > delta {
                regions.ru.push((p, q));
            } else {
                regions.closure.push((p, q));
                if in_secret_initial[p] && in_public_initial[q] {
                    regions.r0.push((p, q));
                }
                if d < delta && (on_ring[p] || on_ring[q]) {
                    regions.ring.push((p, q));
                }
            }
        }
    }
    Ok(regions)
}

/// A sample at which a condition fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub condition: BarrierCondition,
    /// Position of the sample within its region.
    pub sample: usize,
    pub x: Vec<f64>,
    pub xh: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uh: Option<Vec<f64>>,
    /// The certificate value for the pointwise conditions; the difference
    /// `B(f(x,u), f(x̂,û)) − B(x,x̂)` at `(u, uh)` for the decrease condition.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub condition: BarrierCondition,
    pub samples: usize,
    pub violations: usize,
    /// Smallest signed slack over the samples; negative (or at most the
    /// margin, for strict conditions) exactly when violated. `None` without
    /// samples.
    pub min_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub kind: BarrierKind,
    pub status: CheckStatus,
    pub condition: Option<BarrierCondition>,
    pub witness: Option<Violation>,
    pub min_margin: Option<f64>,
    pub total_violations: usize,
    pub violations: Vec<Violation>,
    pub stats: Vec<ConditionStats>,
    pub resolution: f64,
    pub input_step: Option<f64>,
    pub margin: f64,
}

impl CheckReport {
    pub fn stats_for(&self, condition: BarrierCondition) -> Option<&ConditionStats> {
        self.stats.iter().find(|s| s.condition == condition)
    }
}

struct Outcome {
    slack: f64,
    violation: Option<Violation>,
}

fn pointwise(
    cert: &dyn Evaluator,
    regions: &AugmentedRegions,
    pairs: &[(usize, usize)],
    condition: BarrierCondition,
    slack_of: impl Fn(f64) -> f64 + Sync,
    violated: impl Fn(f64) -> bool + Sync,
) -> Vec<Outcome> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, &(p, q))| {
            let (x, xh) = (&regions.points[p], &regions.points[q]);
            let value = cert.eval(x, xh);
            let slack = slack_of(value);
            Outcome {
                slack,
                violation: violated(slack).then(|| Violation {
                    condition,
                    sample: i,
                    x: x.clone(),
                    xh: xh.clone(),
                    u: None,
                    uh: None,
                    value,
                }),
            }
        })
        .collect()
}

struct Successors {
    inputs: Vec<Vec<f64>>,
    /// `next[p][u] = f(points[p], inputs[u])`.
    next: Vec<Vec<Vec<f64>>>,
}

fn successors(sys: &DtControlSystem, regions: &AugmentedRegions, input_step: f64, cap: usize) -> Result<Successors> {
    let inputs = match &sys.input_box {
        None => vec![Vec::new()],
        Some(b) => {
            let set = BoxSet::new(b.dim(), vec![b.clone()])?;
            match grid_indices(&set, input_step, cap) {
                Err(Error::Quantization(msg)) => return Err(Error::Quantization(format!("input_box: {msg}"))),
                r => r?.iter().map(|k| lattice_point(k, input_step)).collect(),
            }
        }
    };
    let next = regions
        .points
        .par_iter()
        .map(|x| inputs.iter().map(|u| sys.step(x, u)).collect())
        .collect();
    Ok(Successors { inputs, next })
}

/// `∀u ∃û: B(f(x,u), f(x̂,û)) − B(x,x̂) ≤ 0`. The slack of a sample is
/// `min_u max_û (B(x,x̂) − B(f(x,u), f(x̂,û)))`.
fn forall_exists(cert: &dyn Evaluator, regions: &AugmentedRegions, succ: &Successors) -> Vec<Outcome> {
    regions
        .r
        .par_iter()
        .enumerate()
        .map(|(i, &(p, q))| {
            let (x, xh) = (&regions.points[p], &regions.points[q]);
            let here = cert.eval(x, xh);
            let mut worst: Option<(usize, usize, f64)> = None;
            for (u, fx) in succ.next[p].iter().enumerate() {
                let mut best: Option<(usize, f64)> = None;
                for (uh, fxh) in succ.next[q].iter().enumerate() {
                    let diff = cert.eval(fx, fxh) - here;
                    if best.is_none_or(|(_, b)| diff < b || b.is_nan()) {
                        best = Some((uh, diff));
                    }
                }
                let (uh, diff) = best.expect("at least one input");
                if worst.is_none_or(|(_, _, w)| diff > w || diff.is_nan()) {
                    worst = Some((u, uh, diff));
                }
            }
            let (u, uh, diff) = worst.expect("at least one input");
            let slack = -diff;
            Outcome {
                slack,
                violation: (!(slack >= 0.0)).then(|| Violation {
                    condition: BarrierCondition::Decrease,
                    sample: i,
                    x: x.clone(),
                    xh: xh.clone(),
                    u: Some(succ.inputs[u].clone()),
                    uh: Some(succ.inputs[uh].clone()),
                    value: diff,
                }),
            }
        })
        .collect()
}

/// `∃u ∀û: V(f(x,u), f(x̂,û)) − V(x,x̂) < 0`. The slack of a sample is
/// `max_u min_û (V(x,x̂) − V(f(x,u), f(x̂,û)))`.
fn exists_forall(
    cert: &dyn Evaluator,
    regions: &AugmentedRegions,
    succ: &Successors,
    margin: f64,
) -> Vec<Outcome> {
    regions
        .closure
        .par_iter()
        .enumerate()
        .map(|(i, &(p, q))| {
            let (x, xh) = (&regions.points[p], &regions.points[q]);
            let here = cert.eval(x, xh);
            let mut best: Option<(usize, usize, f64)> = None;
            for (u, fx) in succ.next[p].iter().enumerate() {
                let mut worst: Option<(usize, f64)> = None;
                for (uh, fxh) in succ.next[q].iter().enumerate() {
                    let diff = cert.eval(fx, fxh) - here;
                    if worst.is_none_or(|(_, w)| diff > w || diff.is_nan()) {
                        worst = Some((uh, diff));
                    }
                }
                let (uh, diff) = worst.expect("at least one input");
                if best.is_none_or(|(_, _, b)| diff < b || b.is_nan()) {
                    best = Some((u, uh, diff));
                }
            }
            let (u, uh, diff) = best.expect("at least one input");
            let slack = -diff;
            Outcome {
                slack,
                violation: (!(slack > margin)).then(|| Violation {
                    condition: BarrierCondition::Decrease,
                    sample: i,
                    x: x.clone(),
                    xh: xh.clone(),
                    u: Some(succ.inputs[u].clone()),
                    uh: Some(succ.inputs[uh].clone()),
                    value: diff,
                }),
            }
        })
        .collect()
}

fn assemble(
    kind: BarrierKind,
    parts: Vec<(BarrierCondition, Vec<Outcome>)>,
    options: &BarrierOptions,
    input_step: Option<f64>,
) -> CheckReport {
    let mut stats = Vec::new();
    let mut violations = Vec::new();
    let mut total = 0;
    for (condition, outcomes) in parts {
        let count = outcomes.iter().filter(|o| o.violation.is_some()).count();
        total += count;
        stats.push(ConditionStats {
            condition,
            samples: outcomes.len(),
            violations: count,
            min_margin: outcomes.iter().map(|o| o.slack).reduce(f64::min),
        });
        for v in outcomes.into_iter().filter_map(|o| o.violation) {
            if violations.len() < MAX_REPORTED_VIOLATIONS {
                violations.push(v);
            }
        }
    }
    let witness = violations.first().cloned();
    CheckReport {
        kind,
        status: if total > 0 { CheckStatus::Falsified } else { CheckStatus::SamplePassed },
        condition: witness.as_ref().map(|w| w.condition),
        witness,
        min_margin: stats.iter().filter_map(|s| s.min_margin).reduce(f64::min),
        total_violations: total,
        violations,
        stats,
        resolution: options.resolution,
        input_step,
        margin: options.margin,
    }
}

fn prepare(sys: &DtControlSystem, delta: f64, options: &BarrierOptions) -> Result<(AugmentedRegions, Successors, Option<f64>)> {
    sys.validate()?;
    if !(options.margin.is_finite() && options.margin >= 0.0) {
        return Err(Error::Validation(format!("margin must be nonnegative, got {}", options.margin)));
    }
    let regions = augmented_regions(sys, delta, options.resolution, options.cap)?;
    let input_step = options.input_step.unwrap_or(options.resolution);
    if !(input_step.is_finite() && input_step > 0.0) {
        return Err(Error::Quantization(format!("input step must be positive, got {input_step}")));
    }
    let succ = successors(sys, &regions, input_step, options.cap)?;
    let used = sys.input_box.as_ref().map(|_| input_step);
    Ok((regions, succ, used))
}

/// Checks `B ≤ 0` on `R₀`, `B > 0` on `Rᵤ`, and for every sample of `R` and
/// every grid input `u` some grid input `û` with a non-increasing `B`.
pub fn check_opacity_barrier(
    cert: &dyn Evaluator,
    sys: &DtControlSystem,
    delta: f64,
    options: &BarrierOptions,
) -> Result<CheckReport> {
    let (regions, succ, input_step) = prepare(sys, delta, options)?;
    let margin = options.margin;
    let parts = vec![
        (
            BarrierCondition::Initial,
            pointwise(cert, &regions, &regions.r0, BarrierCondition::Initial, |v| -v, |s| !(s >= 0.0)),
        ),
        (
            BarrierCondition::Unsafe,
            pointwise(cert, &regions, &regions.ru, BarrierCondition::Unsafe, |v| v, |s| !(s > margin)),
        ),
        (BarrierCondition::Decrease, forall_exists(cert, &regions, &succ)),
    ];
    Ok(assemble(BarrierKind::Opacity, parts, options, input_step))
}

/// Checks `V ≤ 0` on `R₀`, `V > 0` on the boundary ring away from `Rᵤ`, and
/// for every sample of the closure of `R ∖ Rᵤ` some grid input `u` under
/// which `V` strictly decreases for every grid input `û`.
pub fn check_lack_barrier(
    cert: &dyn Evaluator,
    sys: &DtControlSystem,
    delta: f64,
    options: &BarrierOptions,
) -> Result<CheckReport> {
    if sys.state_box.boxes().iter().any(|b| b.lo.iter().chain(&b.hi).any(|v| !v.is_finite())) {
        return Err(Error::Validation("the lack-of-opacity check needs a bounded state set".into()));
    }
    let (regions, succ, input_step) = prepare(sys, delta, options)?;
    let margin = options.margin;
    let parts = vec![
        (
            BarrierCondition::Initial,
            pointwise(cert, &regions, &regions.r0, BarrierCondition::Initial, |v| -v, |s| !(s >= 0.0)),
        ),
        (
            BarrierCondition::Boundary,
            pointwise(cert, &regions, &regions.ring, BarrierCondition::Boundary, |v| v, |s| !(s > margin)),
        ),
        (BarrierCondition::Decrease, exists_forall(cert, &regions, &succ, margin)),
    ];
    Ok(assemble(BarrierKind::Lack, parts, options, input_step))
}
