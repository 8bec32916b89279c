//! Feedback interconnections of two scalar linear subsystems
//! `xᵢ⁺ = aᵢ·xᵢ + bᵢ·xⱼ` with identity outputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::{check_opacity_barrier, BarrierOptions, CheckReport, CheckStatus, DEFAULT_MARGIN};
use crate::boxes::{grid_indices, lattice_point, BoxSet, IntervalBox};
use crate::control::DtControlSystem;
use crate::error::{Error, Result};
use crate::expr::{BinOp, Expr, Var};
use crate::observer::DEFAULT_STATE_CAP;
use crate::polynomial::Evaluator;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSubsystem {
    pub a: f64,
    pub b: f64,
    pub state: IntervalBox,
    pub initial: BoxSet,
    pub secret: BoxSet,
}

/// Bounds at which a local simulation function is checked: abstract grid
/// step `eta`, sublevel `epsilon`, and tolerated internal-input mismatch
/// `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interface {
    pub eta: f64,
    pub epsilon: f64,
    pub theta: f64,
}

impl LinearSubsystem {
    pub fn new(a: f64, b: f64, state: [f64; 2], initial: &[[f64; 2]], secret: &[[f64; 2]]) -> Result<Self> {
        if !(a.abs() < 1.0) {
            return Err(Error::Validation(format!("subsystem needs |a| < 1, got a = {a}")));
        }
        if !b.is_finite() {
            return Err(Error::Validation(format!("subsystem b must be finite, got {b}")));
        }
        let state = IntervalBox::new(&[state])?;
        let union = |bs: &[[f64; 2]]| -> Result<BoxSet> {
            BoxSet::new(1, bs.iter().map(|b| IntervalBox::new(&[*b])).collect::<Result<_>>()?)
        };
        let sub = LinearSubsystem { a, b, initial: union(initial)?, secret: union(secret)?, state };
        let whole = BoxSet::new(1, vec![sub.state.clone()])?;
        if !sub.initial.is_subset_of(&whole) || !sub.secret.is_subset_of(&whole) {
            return Err(Error::Validation("subsystem initial and secret sets must lie inside its state interval".into()));
        }
        Ok(sub)
    }

    /// `γ = |b / (1 − a)|`.
    pub fn gain(&self) -> f64 {
        (self.b / (1.0 - self.a)).abs()
    }

    fn state_set(&self) -> BoxSet {
        BoxSet::new(1, vec![self.state.clone()]).expect("one-dimensional interval")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainReport {
    pub gamma1: f64,
    pub gamma2: f64,
    pub product: f64,
    pub small_gain_ok: bool,
}

pub fn small_gain(sub1: &LinearSubsystem, sub2: &LinearSubsystem) -> GainReport {
    let (gamma1, gamma2) = (sub1.gain(), sub2.gain());
    let product = gamma1 * gamma2;
    GainReport { gamma1, gamma2, product, small_gain_ok: product < 1.0 }
}

fn require_small_gain(sub1: &LinearSubsystem, sub2: &LinearSubsystem) -> Result<GainReport> {
    let gain = small_gain(sub1, sub2);
    if !gain.small_gain_ok {
        return Err(Error::SmallGain { product: gain.product });
    }
    Ok(gain)
}

/// `max(E₁(x₁, x̂₁), E₂(x₂, x̂₂))` over the interconnected augmented state.
#[derive(Debug, Clone)]
pub struct MaxComposition<E> {
    pub locals: [E; 2],
}

impl<E: Evaluator> Evaluator for MaxComposition<E> {
    fn eval(&self, x: &[f64], xh: &[f64]) -> f64 {
        let v1 = self.locals[0].eval(&x[..1], &xh[..1]);
        let v2 = self.locals[1].eval(&x[1..2], &xh[1..2]);
        v1.max(v2)
    }
}

/// The interconnection as a two-dimensional control system without inputs,
/// with `X₀ = X₀₁ × X₀₂`, `X_S = X_S1 × X_S2` and `H = id`.
pub fn interconnect(sub1: &LinearSubsystem, sub2: &LinearSubsystem) -> Result<DtControlSystem> {
    let lin = |a: f64, xi: usize, b: f64, xj: usize| {
        let term = |c: f64, v: usize| Expr::Bin(BinOp::Mul, Box::new(Expr::Const(c)), Box::new(Expr::Var(Var::X(v))));
        Expr::Bin(BinOp::Add, Box::new(term(a, xi)), Box::new(term(b, xj)))
    };
    let product = |s1: &BoxSet, s2: &BoxSet| -> Result<BoxSet> {
        let mut boxes = Vec::new();
        for b1 in s1.boxes() {
            for b2 in s2.boxes() {
                boxes.push(IntervalBox::new(&[[b1.lo[0], b1.hi[0]], [b2.lo[0], b2.hi[0]]])?);
            }
        }
        BoxSet::new(2, boxes)
    };
    let sys = DtControlSystem {
        dim: 2,
        input_dim: 0,
        state_box: product(&sub1.state_set(), &sub2.state_set())?,
        initial_box: product(&sub1.initial, &sub2.initial)?,
        secret_box: product(&sub1.secret, &sub2.secret)?,
        input_box: None,
        dynamics: vec![lin(sub1.a, 0, sub1.b, 1), lin(sub2.a, 1, sub2.b, 0)],
        output: vec![Expr::Var(Var::X(0)), Expr::Var(Var::X(1))],
        iss: None,
    };
    sys.validate()?;
    Ok(sys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalCondition {
    /// `Bᵢ ≥ ‖(xᵢ, x̂ᵢ)‖` on `Rᵢ`.
    LowerBound,
    /// `Bᵢ ≤ 0` on `R₀ᵢ`.
    Initial,
    /// `Bᵢ > 0` on `Rᵤᵢ`.
    Unsafe,
    /// `Bᵢ(xᵢ⁺, x̂ᵢ⁺) ≤ (1 − aᵢ)·Bᵢ(xᵢ, x̂ᵢ) + bᵢ·‖(xⱼ, x̂ⱼ)‖`.
    Decrease,
    /// Every secret initial state has a secret abstract initial state
    /// within the sublevel.
    InitialSecret,
    /// Same for public initial states.
    InitialPublic,
    /// `Vᵢ ≥ |xᵢ − x̂ᵢ|`.
    Output,
    /// The sublevel `Vᵢ ≤ εᵢ` is kept under internal inputs within `ϑᵢ`.
    Step,
}

/// A failing sample; `partner` holds `(xⱼ, x̂ⱼ)` for conditions that
/// quantify over the other subsystem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalWitness {
    pub x: f64,
    pub xh: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<(f64, f64)>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalCheck {
    pub subsystem: usize,
    pub condition: LocalCondition,
    pub samples: usize,
    pub violations: usize,
    pub min_margin: Option<f64>,
    pub witness: Option<LocalWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionReport {
    pub gain: GainReport,
    pub status: CheckStatus,
    pub locals: Vec<LocalCheck>,
    /// Re-check of the composed evaluator on the interconnected system,
    /// present when every local condition passed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub composed: Option<CompositionCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CompositionCheck {
    Barrier(CheckReport),
    Simulation(Vec<LocalCheck>),
}

impl CompositionReport {
    pub fn local(&self, subsystem: usize, condition: LocalCondition) -> Option<&LocalCheck> {
        self.locals.iter().find(|c| c.subsystem == subsystem && c.condition == condition)
    }
}

fn samples(set: &BoxSet, step: f64, cap: usize) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Ok(Vec::new());
    }
    Ok(grid_indices(set, step, cap)?.iter().map(|k| lattice_point(k, step)[0]).collect())
}

struct Tally {
    slack: f64,
    witness: Option<LocalWitness>,
}

fn summarize(subsystem: usize, condition: LocalCondition, tallies: Vec<Tally>) -> LocalCheck {
    LocalCheck {
        subsystem,
        condition,
        samples: tallies.len(),
        violations: tallies.iter().filter(|t| t.witness.is_some()).count(),
        min_margin: tallies.iter().map(|t| t.slack).reduce(f64::min),
        witness: tallies.into_iter().find_map(|t| t.witness),
    }
}

fn status_of<'a>(checks: impl IntoIterator<Item = &'a LocalCheck>) -> CheckStatus {
    if checks.into_iter().any(|c| c.violations > 0) {
        CheckStatus::Falsified
    } else {
        CheckStatus::SamplePassed
    }
}

/// The four local barrier conditions of subsystem `i` (with partner `j`)
/// on the lattice of step `resolution`; the norm is the max norm.
fn local_barrier(
    index: usize,
    cert: &dyn Evaluator,
    sub: &LinearSubsystem,
    partner: &LinearSubsystem,
    delta: f64,
    resolution: f64,
    cap: usize,
) -> Result<Vec<LocalCheck>> {
    let xs = samples(&sub.state_set(), resolution, cap)?;
    let xj = samples(&partner.state_set(), resolution, cap)?;
    let initial = samples(&sub.initial, resolution, cap)?;
    let secret = samples(&sub.secret, resolution, cap)?;
    let near = |v: f64, set: &[f64]| set.iter().any(|s| (s - v).abs() <= 1e-9 * resolution);
    let total = (xs.len() as u128).pow(2) * (xj.len() as u128).pow(2);
    if total > cap as u128 {
        return Err(Error::Resource { what: "local barrier samples", cap });
    }
    let pairs: Vec<(f64, f64)> = xs.iter().flat_map(|&x| xs.iter().map(move |&xh| (x, xh))).collect();
    let partners: Vec<(f64, f64)> = xj.iter().flat_map(|&x| xj.iter().map(move |&xh| (x, xh))).collect();
    let point = |x: f64, xh: f64, partner: Option<(f64, f64)>, value: f64| LocalWitness { x, xh, partner, value };
    let norm = |x: f64, xh: f64| x.abs().max(xh.abs());

    let lower: Vec<Tally> = pairs
        .par_iter()
        .map(|&(x, xh)| {
            let v = cert.eval(&[x], &[xh]);
            let slack = v - norm(x, xh);
            Tally { slack, witness: (!(slack >= 0.0)).then(|| point(x, xh, None, v)) }
        })
        .collect();
    let r0: Vec<&(f64, f64)> = pairs
        .iter()
        .filter(|(x, xh)| {
            near(*x, &initial) && near(*x, &secret) && near(*xh, &initial) && !near(*xh, &secret) && (x - xh).abs() <= delta
        })
        .collect();
    let init: Vec<Tally> = r0
        .par_iter()
        .map(|&&(x, xh)| {
            let v = cert.eval(&[x], &[xh]);
            Tally { slack: -v, witness: (!(v <= 0.0)).then(|| point(x, xh, None, v)) }
        })
        .collect();
    let ru: Vec<&(f64, f64)> = pairs.iter().filter(|(x, xh)| (x - xh).abs() > delta).collect();
    let unsafe_: Vec<Tally> = ru
        .par_iter()
        .map(|&&(x, xh)| {
            let v = cert.eval(&[x], &[xh]);
            Tally { slack: v, witness: (!(v > DEFAULT_MARGIN)).then(|| point(x, xh, None, v)) }
        })
        .collect();
    let decrease: Vec<Tally> = pairs
        .par_iter()
        .flat_map_iter(|&(x, xh)| {
            let here = cert.eval(&[x], &[xh]);
            partners.iter().map(move |&(w, wh)| {
                let next = cert.eval(&[sub.a * x + sub.b * w], &[sub.a * xh + sub.b * wh]);
                let bound = (1.0 - sub.a) * here + sub.b * norm(w, wh);
                let slack = bound - next;
                Tally { slack, witness: (!(slack >= 0.0)).then(|| point(x, xh, Some((w, wh)), next)) }
            })
        })
        .collect();
    Ok(vec![
        summarize(index, LocalCondition::LowerBound, lower),
        summarize(index, LocalCondition::Initial, init),
        summarize(index, LocalCondition::Unsafe, unsafe_),
        summarize(index, LocalCondition::Decrease, decrease),
    ])
}

/// Checks the local barrier conditions of both subsystems and, when they all
/// hold on the samples, re-checks the max-composed certificate on the
/// interconnected system with [`check_opacity_barrier`].
pub fn compose_barriers<E: Evaluator + Clone>(
    b1: E,
    b2: E,
    sub1: &LinearSubsystem,
    sub2: &LinearSubsystem,
    delta: f64,
    resolution: f64,
) -> Result<(MaxComposition<E>, CompositionReport)> {
    let gain = require_small_gain(sub1, sub2)?;
    let cap = DEFAULT_STATE_CAP;
    let mut locals = local_barrier(1, &b1, sub1, sub2, delta, resolution, cap)?;
    locals.extend(local_barrier(2, &b2, sub2, sub1, delta, resolution, cap)?);
    let composition = MaxComposition { locals: [b1, b2] };
    let mut status = status_of(&locals);
    let composed = if status == CheckStatus::SamplePassed {
        let report = check_opacity_barrier(&composition, &interconnect(sub1, sub2)?, delta, &BarrierOptions::new(resolution))?;
        status = report.status;
        Some(CompositionCheck::Barrier(report))
    } else {
        None
    };
    Ok((composition, CompositionReport { gain, status, locals, composed }))
}

/// Index of the lattice point of `states` (step `eta`) nearest to `y`.
fn quantize(y: f64, states: &[f64]) -> f64 {
    *states
        .iter()
        .min_by(|a, b| (*a - y).abs().total_cmp(&(*b - y).abs()))
        .expect("nonempty abstract grid")
}

struct LocalGrids {
    concrete: Vec<f64>,
    abstract_: Vec<f64>,
    secret_initial: Vec<f64>,
    public_initial: Vec<f64>,
    abstract_secret_initial: Vec<f64>,
    abstract_public_initial: Vec<f64>,
}

fn local_grids(sub: &LinearSubsystem, eta: f64, resolution: f64, cap: usize) -> Result<LocalGrids> {
    let concrete = samples(&sub.state_set(), resolution, cap)?;
    let abstract_ = samples(&sub.state_set(), eta, cap)?;
    let split = |grid: &[f64], step: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let initial = samples(&sub.initial, step, cap)?;
        let secret = samples(&sub.secret, step, cap)?;
        let near = |v: f64, set: &[f64]| set.iter().any(|s| (s - v).abs() <= 1e-9 * step);
        let si = grid.iter().copied().filter(|&x| near(x, &initial) && near(x, &secret)).collect();
        let pi = grid.iter().copied().filter(|&x| near(x, &initial) && !near(x, &secret)).collect();
        Ok((si, pi))
    };
    let (secret_initial, public_initial) = split(&concrete, resolution)?;
    let (abstract_secret_initial, abstract_public_initial) = split(&abstract_, eta)?;
    Ok(LocalGrids {
        concrete,
        abstract_,
        secret_initial,
        public_initial,
        abstract_secret_initial,
        abstract_public_initial,
    })
}

/// The local simulation-function conditions of subsystem `i`. The abstract
/// subsystem lives on the `eta` lattice of its interval and moves to the
/// lattice point nearest to `aᵢ·x̂ᵢ + bᵢ·ŵᵢ`.
fn local_simulation(
    index: usize,
    v: &dyn Evaluator,
    sub: &LinearSubsystem,
    iface: &Interface,
    own: &LocalGrids,
    other: &LocalGrids,
) -> Vec<LocalCheck> {
    let eps = iface.epsilon;
    let point = |x: f64, xh: f64, partner: Option<(f64, f64)>, value: f64| LocalWitness { x, xh, partner, value };
    let related = |from: &[f64], to: &[f64]| -> Vec<Tally> {
        from.par_iter()
            .map(|&x| {
                let best = to.iter().map(|&xh| (xh, v.eval(&[x], &[xh]))).min_by(|a, b| a.1.total_cmp(&b.1));
                match best {
                    Some((xh, value)) => Tally {
                        slack: eps - value,
                        witness: (!(value <= eps)).then(|| point(x, xh, None, value)),
                    },
                    None => Tally { slack: f64::NEG_INFINITY, witness: Some(point(x, f64::NAN, None, f64::INFINITY)) },
                }
            })
            .collect()
    };
    let initial_secret = related(&own.secret_initial, &own.abstract_secret_initial);
    let initial_public = related(&own.public_initial, &own.abstract_public_initial);
    let pairs: Vec<(f64, f64)> = own
        .concrete
        .iter()
        .flat_map(|&x| own.abstract_.iter().map(move |&xh| (x, xh)))
        .collect();
    let output: Vec<Tally> = pairs
        .par_iter()
        .map(|&(x, xh)| {
            let value = v.eval(&[x], &[xh]);
            let slack = value - (x - xh).abs();
            Tally { slack, witness: (!(slack >= 0.0)).then(|| point(x, xh, None, value)) }
        })
        .collect();
    let inside: Vec<(f64, f64)> = pairs.into_iter().filter(|&(x, xh)| v.eval(&[x], &[xh]) <= eps).collect();
    let step: Vec<Tally> = inside
        .par_iter()
        .flat_map_iter(|&(x, xh)| {
            other.concrete.iter().flat_map(move |&w| {
                other
                    .abstract_
                    .iter()
                    .filter(move |&&wh| (w - wh).abs() <= iface.theta)
                    .map(move |&wh| {
                        let next = sub.a * x + sub.b * w;
                        let next_h = quantize(sub.a * xh + sub.b * wh, &own.abstract_);
                        let value = v.eval(&[next], &[next_h]);
                        Tally {
                            slack: eps - value,
                            witness: (!(value <= eps)).then(|| point(x, xh, Some((w, wh)), value)),
                        }
                    })
            })
        })
        .collect();
    vec![
        summarize(index, LocalCondition::InitialSecret, initial_secret),
        summarize(index, LocalCondition::InitialPublic, initial_public),
        summarize(index, LocalCondition::Output, output),
        summarize(index, LocalCondition::Step, step),
    ]
}

/// Sublevel invariance of the composed function on the product grids:
/// whenever `Vᵢ(xᵢ, x̂ᵢ) ≤ εᵢ` for both `i`, the same holds one step later.
fn composed_step<E: Evaluator>(
    comp: &MaxComposition<E>,
    subs: [&LinearSubsystem; 2],
    ifaces: [&Interface; 2],
    grids: [&LocalGrids; 2],
) -> LocalCheck {
    let within = |i: usize, x: f64, xh: f64| comp.locals[i].eval(&[x], &[xh]) <= ifaces[i].epsilon;
    let pairs = |i: usize| -> Vec<(f64, f64)> {
        grids[i]
            .concrete
            .iter()
            .flat_map(|&x| grids[i].abstract_.iter().map(move |&xh| (x, xh)))
            .filter(|&(x, xh)| within(i, x, xh))
            .collect()
    };
    let (p1, p2) = (pairs(0), pairs(1));
    let tallies: Vec<Tally> = p1
        .par_iter()
        .flat_map_iter(|&(x1, xh1)| {
            p2.iter().map(move |&(x2, xh2)| {
                let next = [subs[0].a * x1 + subs[0].b * x2, subs[1].a * x2 + subs[1].b * x1];
                let next_h = [
                    quantize(subs[0].a * xh1 + subs[0].b * xh2, &grids[0].abstract_),
                    quantize(subs[1].a * xh2 + subs[1].b * xh1, &grids[1].abstract_),
                ];
                let slack = (0..2)
                    .map(|i| ifaces[i].epsilon - comp.locals[i].eval(&next[i..=i], &next_h[i..=i]))
                    .fold(f64::INFINITY, f64::min);
                Tally {
                    slack,
                    witness: (!(slack >= 0.0)).then(|| LocalWitness {
                        x: x1,
                        xh: xh1,
                        partner: Some((x2, xh2)),
                        value: comp.eval(&next, &next_h),
                    }),
                }
            })
        })
        .collect();
    summarize(0, LocalCondition::Step, tallies)
}

/// Checks the local simulation-function conditions of both subsystems and,
/// when they hold, the sublevel invariance of the max composition on the
/// interconnection.
pub fn compose_simulation<E: Evaluator + Clone>(
    v1: E,
    v2: E,
    sub1: &LinearSubsystem,
    sub2: &LinearSubsystem,
    ifaces: [Interface; 2],
    resolution: f64,
) -> Result<(MaxComposition<E>, CompositionReport)> {
    let gain = require_small_gain(sub1, sub2)?;
    for iface in &ifaces {
        if !(iface.eta > 0.0 && iface.epsilon >= 0.0 && iface.theta >= 0.0) {
            return Err(Error::Validation(format!("invalid interface bounds {iface:?}")));
        }
    }
    let cap = DEFAULT_STATE_CAP;
    let g1 = local_grids(sub1, ifaces[0].eta, resolution, cap)?;
    let g2 = local_grids(sub2, ifaces[1].eta, resolution, cap)?;
    let mut locals = local_simulation(1, &v1, sub1, &ifaces[0], &g1, &g2);
    locals.extend(local_simulation(2, &v2, sub2, &ifaces[1], &g2, &g1));
    let composition = MaxComposition { locals: [v1, v2] };
    let mut status = status_of(&locals);
    let composed = if status == CheckStatus::SamplePassed {
        let check = composed_step(&composition, [sub1, sub2], [&ifaces[0], &ifaces[1]], [&g1, &g2]);
        status = status_of([&check]);
        Some(CompositionCheck::Simulation(vec![check]))
    } else {
        None
    };
    Ok((composition, CompositionReport { gain, status, locals, composed }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemDocument {
    pub a: f64,
    pub b: f64,
    pub state: [f64; 2],
    /// Defaults to the whole state interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub secret: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interface: Option<Interface>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterconnectionDocument {
    pub sub1: SubsystemDocument,
    pub sub2: SubsystemDocument,
}

impl SubsystemDocument {
    pub fn build(&self) -> Result<LinearSubsystem> {
        let initial = self.initial.clone().unwrap_or_else(|| vec![self.state]);
        LinearSubsystem::new(self.a, self.b, self.state, &initial, &self.secret)
    }
}

pub fn parse_interconnection(text: &[u8]) -> Result<InterconnectionDocument> {
    serde_json::from_slice(text).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(a: f64, b: f64) -> LinearSubsystem {
        LinearSubsystem::new(a, b, [0.0, 1.0], &[[0.0, 0.1], [0.9, 1.0]], &[[0.9, 1.0]]).unwrap()
    }

    #[test]
    fn gain_examples() {
        let g = small_gain(&sub(0.5, 0.2), &sub(0.5, 0.2));
        assert!((g.gamma1 - 0.4).abs() < 1e-15 && (g.product - 0.16).abs() < 1e-15 && g.small_gain_ok);
        assert_eq!(small_gain(&sub(0.5, 0.0), &sub(0.9, 100.0)).product, 0.0);
        let g = small_gain(&sub(0.9, 0.5), &sub(0.9, 0.5));
        assert!((g.gamma1 - 5.0).abs() < 1e-12 && !g.small_gain_ok);
        assert!(LinearSubsystem::new(1.0, 0.2, [0.0, 1.0], &[], &[]).is_err());
        assert!(LinearSubsystem::new(-1.5, 0.2, [0.0, 1.0], &[], &[]).is_err());
    }

    #[test]
    fn failing_gain_blocks_composition() {
        let zero = |_: &[f64], _: &[f64]| 0.0;
        let result = compose_barriers(zero, zero, &sub(0.9, 0.5), &sub(0.9, 0.5), 0.2, 0.05);
        assert!(matches!(result, Err(Error::SmallGain { .. })));
    }

    #[test]
    fn max_norm_composes_into_an_interconnected_barrier() {
        let norm = |x: &[f64], xh: &[f64]| x[0].abs().max(xh[0].abs());
        let (s1, s2) = (sub(0.5, 0.2), sub(0.5, 0.2));
        let (comp, report) = compose_barriers(norm, norm, &s1, &s2, 0.2, 0.05).unwrap();
        let lower = report.local(1, LocalCondition::LowerBound).unwrap();
        assert_eq!(lower.min_margin, Some(0.0));
        assert_eq!(report.status, CheckStatus::SamplePassed, "{report:#?}");
        assert!(matches!(report.composed, Some(CompositionCheck::Barrier(ref r)) if r.status == CheckStatus::SamplePassed));
        assert_eq!(comp.eval(&[0.25, -0.5], &[0.0, 0.125]), 0.5);
    }

    #[test]
    fn distance_composes_into_a_simulation_function() {
        let dist = |x: &[f64], xh: &[f64]| (x[0] - xh[0]).abs();
        let iface = Interface { eta: 0.1, epsilon: 0.2, theta: 0.2 };
        let (s1, s2) = (sub(0.5, 0.2), sub(0.5, 0.2));
        let (_, report) = compose_simulation(dist, dist, &s1, &s2, [iface; 2], 0.05).unwrap();
        assert_eq!(report.status, CheckStatus::SamplePassed, "{report:#?}");
        // Too small a sublevel cannot absorb the quantization error.
        let tight = Interface { epsilon: 0.1, theta: 0.1, ..iface };
        let (_, report) = compose_simulation(dist, dist, &s1, &s2, [tight; 2], 0.05).unwrap();
        assert_eq!(report.status, CheckStatus::Falsified);
        assert!(report.local(1, LocalCondition::Step).unwrap().violations > 0);
    }
}
