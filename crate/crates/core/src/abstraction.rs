//! Grid abstractions of δ-ISS control systems.
//!
//! Abstract states are the lattice points `k·η` of the state set, abstract
//! inputs the lattice points `k·μ` of the input box. `x̂'` is a successor of
//! `(x̂, û)` iff `‖x̂' − f(x̂, û)‖∞ ≤ η`. Every abstract state is initial and
//! the secret states are the lattice points of the secret set.

use std::collections::HashMap;
use std::str::FromStr;

use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::boxes::{exceeds_span, grid_indices, lattice_point, BoxSet};
use crate::control::{DtControlSystem, IssCertificate};
use crate::error::{Error, Result};
use crate::observer::DEFAULT_STATE_CAP;
use crate::system::{MetricSystem, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationParams {
    pub eta: f64,
    pub mu: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationCheck {
    pub pass: bool,
    /// `c·λ·(ε/a) + g·μ + η`
    pub lhs: f64,
    /// `ε/a`
    pub rhs: f64,
    /// `rhs − lhs`
    pub slack: f64,
}

/// Evaluates `β(α⁻¹(ε), 1) + γ(μ) + η ≤ α⁻¹(ε)` for the linear forms of the
/// certificate.
pub fn check_quantization(cert: &IssCertificate, params: &QuantizationParams) -> QuantizationCheck {
    let rhs = params.epsilon / cert.a;
    let lhs = cert.c * cert.lambda * rhs + cert.g * params.mu + params.eta;
    QuantizationCheck {
        pass: lhs <= rhs,
        lhs,
        rhs,
        slack: rhs - lhs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbstractionOptions {
    /// Build even when the quantization inequality fails.
    pub unsound: bool,
    pub cap: usize,
}

impl Default for AbstractionOptions {
    fn default() -> Self {
        AbstractionOptions { unsound: false, cap: DEFAULT_STATE_CAP }
    }
}

#[derive(Debug, Clone)]
pub struct Abstraction {
    pub system: MetricSystem,
    pub check: QuantizationCheck,
    /// `false` when built with a failing quantization check.
    pub certified: bool,
    pub state_points: Vec<Vec<f64>>,
    pub input_points: Vec<Vec<f64>>,
}

/// Checks `0 < η ≤ min{span(X_S), span(X ∖ X_S)}` and `0 < μ ≤ span(U)`.
pub fn validate_params(sys: &DtControlSystem, params: &QuantizationParams) -> Result<()> {
    let QuantizationParams { eta, mu, epsilon } = *params;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Quantization(format!("eta must be positive, got {eta}")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Quantization(format!("epsilon must be positive, got {epsilon}")));
    }
    for (name, span) in [("span(X_S)", sys.secret_box.span()), ("span(X \\ X_S)", sys.public_box().span())] {
        if let Some(span) = span {
            if exceeds_span(eta, span) {
                return Err(Error::Quantization(format!("eta = {eta} exceeds {name} = {span}")));
            }
        }
    }
    if let Some(u) = &sys.input_box {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Quantization(format!("mu must be positive, got {mu}")));
        }
        if exceeds_span(mu, u.width()) {
            return Err(Error::Quantization(format!("mu = {mu} exceeds span(U) = {}", u.width())));
        }
    }
    Ok(())
}

/// Decimal rendering of `k·step`, e.g. `3·0.1` as `0.3`.
fn coordinate_name(k: i64, step: f64) -> String {
    match Decimal::from_str(&step.to_string()) {
        Ok(d) => match d.checked_mul(Decimal::from(k)) {
            Some(v) => v.normalize().to_string(),
            None => (k as f64 * step).to_string(),
        },
        Err(_) => (k as f64 * step).to_string(),
    }
}

fn point_name(k: &[i64], step: f64) -> String {
    let coords: Vec<String> = k.iter().map(|&k| coordinate_name(k, step)).collect();
    format!("({})", coords.join(","))
}

fn input_grid(sys: &DtControlSystem, mu: f64, cap: usize) -> Result<Vec<Vec<i64>>> {
    match &sys.input_box {
        None => Ok(vec![Vec::new()]),
        Some(b) => grid_indices(&BoxSet::new(b.dim(), vec![b.clone()])?, mu, cap),
    }
}

/// Integer coordinates of lattice points within `eta` of `y` in every axis.
fn ball_candidates(y: &[f64], eta: f64) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for &yi in y {
        let lo = ((yi - eta) / eta).floor() as i64 - 1;
        let hi = ((yi + eta) / eta).ceil() as i64 + 1;
        let ks: Vec<i64> = (lo..=hi).filter(|&k| (k as f64 * eta - yi).abs() <= eta).collect();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                ks.iter().map(move |&k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn build_abstraction(
    sys: &DtControlSystem,
    params: &QuantizationParams,
    options: &AbstractionOptions,
) -> Result<Abstraction> {
    let cert = sys
        .iss
        .ok_or_else(|| Error::Validation("the control system has no iss_cert".into()))?;
    validate_params(sys, params)?;
    let check = check_quantization(&cert, params);
    if !check.pass && !options.unsound {
        return Err(Error::Quantization(format!(
            "quantization inequality fails: {} > {} (slack {})",
            check.lhs, check.rhs, check.slack
        )));
    }
    let eta = params.eta;
    let states = grid_indices(&sys.state_box, eta, options.cap)?;
    let index: HashMap<&[i64], StateId> = states.iter().enumerate().map(|(i, k)| (k.as_slice(), i)).collect();
    let secret: Vec<StateId> = grid_indices(&sys.secret_box, eta, options.cap)?
        .iter()
        .filter_map(|k| index.get(k.as_slice()).copied())
        .collect();
    let inputs = input_grid(sys, params.mu, options.cap)?;
    let state_points: Vec<Vec<f64>> = states.iter().map(|k| lattice_point(k, eta)).collect();
    let input_points: Vec<Vec<f64>> = inputs.iter().map(|k| lattice_point(k, params.mu)).collect();

    let per_state: Vec<Result<Vec<(StateId, usize, StateId)>>> = state_points
        .par_iter()
        .enumerate()
        .map(|(s, x)| {
            let mut out = Vec::new();
            for (u, v) in input_points.iter().enumerate() {
                let y = sys.step(x, v);
                if y.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Domain { state: x.clone(), input: v.clone(), reason: "dynamics is not finite".into() });
                }
                let before = out.len();
                for k in ball_candidates(&y, eta) {
                    if let Some(&t) = index.get(k.as_slice()) {
                        out.push((s, u, t));
                    }
                }
                if out.len() == before {
                    return Err(Error::Domain {
                        state: x.clone(),
                        input: v.clone(),
                        reason: format!("f = {y:?} has no grid point of the state set within eta"),
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut transitions = Vec::new();
    for r in per_state {
        transitions.extend(r?);
    }

    let named_states = states
        .iter()
        .zip(&state_points)
        .map(|(k, x)| (point_name(k, eta), sys.observe(x)))
        .collect();
    let input_names = inputs.iter().map(|k| point_name(k, params.mu)).collect();
    let system = MetricSystem::new(named_states, input_names, (0..states.len()).collect(), secret, transitions)?;
    Ok(Abstraction {
        system,
        check,
        certified: check.pass,
        state_points,
        input_points,
    })
}

/// A finite sample of the concrete dynamics: states are the lattice points
/// of `X` at `step`, inputs those of `U` at `mu`, and each step goes to the
/// lattice point nearest to `f(x, u)`.
pub fn sampled_system(sys: &DtControlSystem, step: f64, mu: f64, cap: usize) -> Result<MetricSystem> {
    let states = grid_indices(&sys.state_box, step, cap)?;
    let index: HashMap<&[i64], StateId> = states.iter().enumerate().map(|(i, k)| (k.as_slice(), i)).collect();
    let lookup = |set: &BoxSet| -> Result<Vec<StateId>> {
        if set.is_empty() {
            return Ok(Vec::new());
        }
        Ok(grid_indices(set, step, cap)?.iter().filter_map(|k| index.get(k.as_slice()).copied()).collect())
    };
    let initial = lookup(&sys.initial_box)?;
    let secret = lookup(&sys.secret_box)?;
    let inputs = input_grid(sys, mu, cap)?;
    let mut transitions = Vec::new();
    for (s, k) in states.iter().enumerate() {
        let x = lattice_point(k, step);
        for (u, ku) in inputs.iter().enumerate() {
            let v = lattice_point(ku, mu);
            let y = sys.step(&x, &v);
            let nearest: Vec<i64> = y.iter().map(|c| (c / step).round() as i64).collect();
            match index.get(nearest.as_slice()) {
                Some(&t) => transitions.push((s, u, t)),
                None => {
                    return Err(Error::Domain {
                        state: x,
                        input: v,
                        reason: format!("f = {y:?} leaves the sampled state set"),
                    })
                }
            }
        }
    }
    let named = states.iter().map(|k| (point_name(k, step), sys.observe(&lattice_point(k, step)))).collect();
    let input_names = inputs.iter().map(|k| point_name(k, mu)).collect();
    MetricSystem::new(named, input_names, initial, secret, transitions)
}
