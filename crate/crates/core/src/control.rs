//! Discrete-time control systems `x⁺ = f(x, u)`, `y = H(x)` on box domains.

use serde::{Deserialize, Serialize};

use crate::boxes::{BoxSet, BoxSetDocument, IntervalBox};
use crate::error::{Error, Result};
use crate::expr::Expr;

/// Parameters of a δ-ISS certificate `β(r, k) = c·λᵏ·r`, `γ(r) = g·r`,
/// together with an output Lipschitz bound `α(r) = a·r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssCertificate {
    pub c: f64,
    pub lambda: f64,
    pub g: f64,
    pub a: f64,
}

impl IssCertificate {
    pub fn validate(&self) -> Result<()> {
        let IssCertificate { c, lambda, g, a } = *self;
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::Validation(format!("iss_cert.c must be at least 1, got {c}")));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Validation(format!("iss_cert.lambda must lie in (0, 1), got {lambda}")));
        }
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::Validation(format!("iss_cert.g must be nonnegative, got {g}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Validation(format!("iss_cert.a must be positive, got {a}")));
        }
        Ok(())
    }
}

/// Certificate for affine dynamics `x⁺ = A x + B u` in the infinity norm:
/// `c = 1`, `λ = ‖A‖∞`, `g = ‖B‖∞ / (1 − λ)`. Only valid when `‖A‖∞ < 1`.
pub fn affine_certificate(a: &[Vec<f64>], b: &[Vec<f64>], output_lipschitz: f64) -> Result<IssCertificate> {
    let norm = |m: &[Vec<f64>]| m.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let lambda = norm(a);
    if lambda >= 1.0 {
        return Err(Error::Validation(format!("affine certificate needs ‖A‖∞ < 1, got {lambda}")));
    }
    let cert = IssCertificate {
        c: 1.0,
        lambda,
        g: norm(b) / (1.0 - lambda),
        a: output_lipschitz,
    };
    if lambda == 0.0 {
        // A zero rate is not admissible in β, and any positive rate bounds A = 0.
        return Ok(IssCertificate { lambda: f64::MIN_POSITIVE, ..cert });
    }
    Ok(cert)
}

#[derive(Debug, Clone)]
pub struct DtControlSystem {
    pub dim: usize,
    pub input_dim: usize,
    pub state_box: BoxSet,
    pub initial_box: BoxSet,
    pub secret_box: BoxSet,
    /// `None` when the system has no inputs.
    pub input_box: Option<IntervalBox>,
    pub dynamics: Vec<Expr>,
    pub output: Vec<Expr>,
    pub iss: Option<IssCertificate>,
}

impl DtControlSystem {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("dim must be positive".into()));
        }
        if self.state_box.is_empty() {
            return Err(Error::Validation("state_box must be nonempty".into()));
        }
        for (name, set) in [("state_box", &self.state_box), ("initial_box", &self.initial_box), ("secret_box", &self.secret_box)] {
            if set.dim() != self.dim {
                return Err(Error::Validation(format!("{name}: expected dimension {}, found {}", self.dim, set.dim())));
            }
        }
        if !self.initial_box.is_subset_of(&self.state_box) {
            return Err(Error::Validation("initial_box must lie inside state_box".into()));
        }
        if !self.secret_box.is_subset_of(&self.state_box) {
            return Err(Error::Validation("secret_box must lie inside state_box".into()));
        }
        let input_dim = self.input_box.as_ref().map_or(0, IntervalBox::dim);
        if input_dim != self.input_dim {
            return Err(Error::Validation(format!("input_box: expected dimension {}, found {input_dim}", self.input_dim)));
        }
        if self.dynamics.len() != self.dim {
            return Err(Error::Validation(format!(
                "dynamics: expected {} expressions, found {}",
                self.dim,
                self.dynamics.len()
            )));
        }
        for (i, e) in self.dynamics.iter().enumerate() {
            let (nx, nu) = e.arity();
            if nx > self.dim || nu > self.input_dim {
                return Err(Error::Validation(format!("dynamics[{i}]: '{e}' uses an undeclared variable")));
            }
        }
        if self.output.is_empty() {
            return Err(Error::Validation("output: at least one expression is required".into()));
        }
        for (i, e) in self.output.iter().enumerate() {
            let (nx, nu) = e.arity();
            if nx > self.dim || nu > 0 {
                return Err(Error::Validation(format!("output[{i}]: '{e}' may only use x1..x{}", self.dim)));
            }
        }
        if let Some(cert) = &self.iss {
            cert.validate()?;
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.output.len()
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.dynamics.iter().map(|e| e.eval(x, u)).collect()
    }

    pub fn observe(&self, x: &[f64]) -> Vec<f64> {
        self.output.iter().map(|e| e.eval(x, &[])).collect()
    }

    /// `X ∖ X_S` as a union of boxes.
    pub fn public_box(&self) -> BoxSet {
        self.state_box.difference(&self.secret_box)
    }

    pub fn from_document(doc: ControlDocument) -> Result<Self> {
        let dim = doc.dim;
        let set = |d: &BoxSetDocument| -> Result<BoxSet> {
            match d {
                BoxSetDocument::Single(b) if b.is_empty() => Ok(BoxSet::empty(dim)),
                BoxSetDocument::Union(bs) if bs.is_empty() => Ok(BoxSet::empty(dim)),
                d => BoxSet::from_document(d, dim),
            }
        };
        let state_box = set(&doc.state_box)?;
        let initial_box = match &doc.initial_box {
            Some(d) => set(d)?,
            None => state_box.clone(),
        };
        let secret_box = match &doc.secret_box {
            Some(d) => set(d)?,
            None => BoxSet::empty(dim),
        };
        let input_box = if doc.input_box.is_empty() { None } else { Some(IntervalBox::new(&doc.input_box)?) };
        let parse_all = |exprs: &[String], field: &str| -> Result<Vec<Expr>> {
            exprs
                .iter()
                .enumerate()
                .map(|(i, s)| Expr::parse(s).map_err(|e| Error::Parse(format!("{field}[{i}]: {e}"))))
                .collect()
        };
        let sys = DtControlSystem {
            dim,
            input_dim: doc.input_box.len(),
            state_box,
            initial_box,
            secret_box,
            input_box,
            dynamics: parse_all(&doc.dynamics, "dynamics")?,
            output: parse_all(&doc.output, "output")?,
            iss: doc.iss_cert,
        };
        sys.validate()?;
        Ok(sys)
    }
}

/// JSON form of a control-system file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlDocument {
    pub dim: usize,
    pub state_box: BoxSetDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_box: Option<BoxSetDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret_box: Option<BoxSetDocument>,
    #[serde(default)]
    pub input_box: Vec<[f64; 2]>,
    pub dynamics: Vec<String>,
    pub output: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iss_cert: Option<IssCertificate>,
}

pub fn parse_control_system(text: &[u8]) -> Result<DtControlSystem> {
    let doc: ControlDocument = serde_json::from_slice(text).map_err(|e| Error::Parse(e.to_string()))?;
    DtControlSystem::from_document(doc)
}
