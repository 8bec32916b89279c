//! Certificate candidates over the augmented state `(x, x̂)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Something that can be evaluated at an augmented state `(x, x̂)`.
pub trait Evaluator: Sync {
    fn eval(&self, x: &[f64], xh: &[f64]) -> f64;
}

impl<F: Fn(&[f64], &[f64]) -> f64 + Sync> Evaluator for F {
    fn eval(&self, x: &[f64], xh: &[f64]) -> f64 {
        self(x, xh)
    }
}

/// A multivariate polynomial in `(x1..xn, x̂1..x̂n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    vars: usize,
    terms: Vec<(Vec<u32>, f64)>,
    degree: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialDocument {
    pub vars: usize,
    pub terms: Vec<TermDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDocument {
    pub exps: Vec<u32>,
    pub coef: f64,
}

impl Polynomial {
    /// Terms with equal exponents are summed.
    pub fn new(vars: usize, terms: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        let mut merged: Vec<(Vec<u32>, f64)> = Vec::with_capacity(terms.len());
        for (i, (exps, coef)) in terms.into_iter().enumerate() {
            if exps.len() != vars {
                return Err(Error::Validation(format!(
                    "terms[{i}]: expected {vars} exponents, found {}",
                    exps.len()
                )));
            }
            if !coef.is_finite() {
                return Err(Error::Validation(format!("terms[{i}]: coefficient must be finite")));
            }
            match merged.iter_mut().find(|(e, _)| *e == exps) {
                Some(t) => t.1 += coef,
                None => merged.push((exps, coef)),
            }
        }
        let mut degree = vec![0; vars];
        for (exps, _) in &merged {
            for (d, &e) in degree.iter_mut().zip(exps) {
                *d = (*d).max(e);
            }
        }
        Ok(Polynomial { vars, terms: merged, degree })
    }

    pub fn constant(vars: usize, c: f64) -> Self {
        Polynomial::new(vars, vec![(vec![0; vars], c)]).expect("constant polynomial is valid")
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn terms(&self) -> &[(Vec<u32>, f64)] {
        &self.terms
    }

    /// Evaluates at `z` using precomputed powers of each variable.
    pub fn eval_at(&self, z: &[f64]) -> f64 {
        let powers: Vec<Vec<f64>> = z
            .iter()
            .zip(&self.degree)
            .map(|(&v, &d)| {
                let mut p = Vec::with_capacity(d as usize + 1);
                let mut acc = 1.0;
                p.push(acc);
                for _ in 0..d {
                    acc *= v;
                    p.push(acc);
                }
                p
            })
            .collect();
        self.terms
            .iter()
            .map(|(exps, coef)| {
                exps.iter()
                    .enumerate()
                    .fold(*coef, |acc, (i, &e)| acc * powers[i][e as usize])
            })
            .sum()
    }

    pub fn from_document(doc: PolynomialDocument) -> Result<Self> {
        Polynomial::new(doc.vars, doc.terms.into_iter().map(|t| (t.exps, t.coef)).collect())
    }

    pub fn to_document(&self) -> PolynomialDocument {
        PolynomialDocument {
            vars: self.vars,
            terms: self
                .terms
                .iter()
                .map(|(exps, coef)| TermDocument { exps: exps.clone(), coef: *coef })
                .collect(),
        }
    }
}

impl Evaluator for Polynomial {
    fn eval(&self, x: &[f64], xh: &[f64]) -> f64 {
        let mut z = Vec::with_capacity(x.len() + xh.len());
        z.extend_from_slice(x);
        z.extend_from_slice(xh);
        self.eval_at(&z)
    }
}

/// A certificate given either as a polynomial or as an expression in which
/// `x1..xn` denote `x` and `x(n+1)..x(2n)` denote `x̂`.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    Polynomial(Polynomial),
    Expression { vars: usize, expr: Expr },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CertificateDocument {
    Polynomial(PolynomialDocument),
    Expression { expression: String },
}

impl Certificate {
    /// Number of augmented variables the certificate expects, when fixed.
    pub fn vars(&self) -> usize {
        match self {
            Certificate::Polynomial(p) => p.vars(),
            Certificate::Expression { vars, .. } => *vars,
        }
    }

    /// Parses a certificate for a system of state dimension `dim`.
    pub fn from_document(doc: CertificateDocument, dim: usize) -> Result<Self> {
        let cert = match doc {
            CertificateDocument::Polynomial(p) => Certificate::Polynomial(Polynomial::from_document(p)?),
            CertificateDocument::Expression { expression } => {
                let expr = Expr::parse(&expression)?;
                let (nx, nu) = expr.arity();
                if nx > 2 * dim || nu > 0 {
                    return Err(Error::Validation(format!(
                        "certificate '{expression}' may only use x1..x{}",
                        2 * dim
                    )));
                }
                Certificate::Expression { vars: 2 * dim, expr }
            }
        };
        if cert.vars() != 2 * dim {
            return Err(Error::Validation(format!(
                "certificate has {} variables, the augmented state has {}",
                cert.vars(),
                2 * dim
            )));
        }
        Ok(cert)
    }
}

pub fn parse_certificate(text: &[u8], dim: usize) -> Result<Certificate> {
    let doc: CertificateDocument = serde_json::from_slice(text).map_err(|e| Error::Parse(e.to_string()))?;
    Certificate::from_document(doc, dim)
}

impl Evaluator for Certificate {
    fn eval(&self, x: &[f64], xh: &[f64]) -> f64 {
        match self {
            Certificate::Polynomial(p) => p.eval(x, xh),
            Certificate::Expression { expr, .. } => {
                let mut z = Vec::with_capacity(x.len() + xh.len());
                z.extend_from_slice(x);
                z.extend_from_slice(xh);
                expr.eval(&z, &[])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_of_difference() {
        // (x - xh)^2 - 0.04 = x^2 - 2 x xh + xh^2 - 0.04
        let p = Polynomial::new(
            2,
            vec![(vec![2, 0], 1.0), (vec![1, 1], -2.0), (vec![0, 2], 1.0), (vec![0, 0], -0.04)],
        )
        .unwrap();
        assert!((p.eval(&[1.0], &[0.0]) - 0.96).abs() < 1e-15);
        assert!((p.eval(&[0.5], &[0.3]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn duplicate_terms_merge() {
        let p = Polynomial::new(1, vec![(vec![1], 1.0), (vec![1], 2.0)]).unwrap();
        assert_eq!(p.terms().len(), 1);
        assert_eq!(p.eval_at(&[2.0]), 6.0);
    }

    #[test]
    fn certificate_documents() {
        let poly = br#"{"vars": 2, "terms": [{"exps": [1, 0], "coef": 1}, {"exps": [0, 1], "coef": -1}]}"#;
        let c = parse_certificate(poly, 1).unwrap();
        assert_eq!(c.eval(&[0.75], &[0.25]), 0.5);
        assert!(parse_certificate(poly, 2).is_err());
        let expr = br#"{"expression": "max(abs(x1), abs(x2))"}"#;
        let c = parse_certificate(expr, 1).unwrap();
        assert_eq!(c.eval(&[-0.5], &[0.25]), 0.5);
        assert!(parse_certificate(br#"{"expression": "x3"}"#, 1).is_err());
    }
}
