//! Quadrature rules from orthogonal polynomials.
//!
//! Classical Gauss-Hermite and Gauss-Legendre rules come from their known
//! recurrences. The trigonometric rule comes from monic cosine polynomials
//! orthogonal under a truncated spectral density, whose recurrence is found
//! numerically. Every rule goes through [`golub_welsch`].

mod jacobi;
mod recurrence;
mod rules;
mod tensor;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};

pub use jacobi::golub_welsch;
pub use recurrence::{stieltjes_coefficients, stieltjes_coefficients_with, Discretization, RecurrenceCoefficients};
pub use rules::{gauss_hermite_rule, gauss_legendre_rule, halve_symmetric, halve_symmetric_odd, trig_rule};
pub use tensor::{tensor_product, TensorRule};

/// What the nodes of a rule mean.
///
/// `Trig` nodes are angles in `[0, pi)`. `Hermite` and `Legendre` nodes are
/// raw abscissae of the polynomial rule, or standardized frequencies once a
/// feature map has transformed them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Trig,
    Hermite,
    Legendre,
}

/// One-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule1D {
    pub kind: RuleKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub domain: (f64, f64),
    /// Trigonometric degree for `Trig`, polynomial degree otherwise.
    pub exactness_degree: usize,
    /// Total mass of the weight the rule integrates against.
    pub mu0: f64,
    /// Truncation parameter the rule was built for, if any.
    pub gamma: Option<f64>,
}

impl QuadratureRule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to `f`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Sorted distinct nodes, trig nodes in `[0, pi)`, weights nonnegative up
    /// to round-off, and weights summing to `mu0`.
    pub fn check_invariants(&self) -> Result<()> {
        if self.nodes.len() != self.weights.len() {
            return Err(Error::LengthMismatch(self.nodes.len(), self.weights.len()));
        }
        if self.nodes.is_empty() {
            return Err(Error::InvalidL(0));
        }
        if let Some(i) = self.nodes.windows(2).position(|p| !(p[1] - p[0] > 1e-12)) {
            return Err(Error::InvalidArgument(format!("nodes {} and {} are not strictly increasing", i, i + 1)));
        }
        if self.kind == RuleKind::Trig {
            if let Some(&w) = self.nodes.iter().find(|&&w| !(0.0..std::f64::consts::PI).contains(&w)) {
                return Err(Error::InvalidArgument(format!("trig node {w} outside [0, pi)")));
            }
        }
        if let Some(&a) = self.weights.iter().find(|&&a| !(a >= -1e-12)) {
            return Err(Error::InvalidArgument(format!("negative weight {a:e}")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - self.mu0).abs() > 1e-10 * self.mu0.abs() {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, expected {}", self.mu0)));
        }
        Ok(())
    }

    /// Serializable form. A 1-d rule is a tensor rule with `dim = 1`.
    pub fn to_document(&self) -> RuleDocument {
        RuleDocument {
            kind: self.kind,
            l: self.len(),
            gamma: self.gamma,
            dim: 1,
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
            exactness_degree: self.exactness_degree,
            mu0: self.mu0,
        }
    }
}

/// JSON form of a rule. For `dim > 1`, `nodes` holds the frequency vectors
/// row-major and `mu0` is the product of the per-dimension masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDocument {
    pub kind: RuleKind,
    #[serde(rename = "L")]
    pub l: usize,
    pub gamma: Option<f64>,
    pub dim: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
    pub mu0: f64,
}

#[derive(Serialize)]
struct RuleDocumentOut {
    kind: RuleKind,
    #[serde(rename = "L")]
    l: usize,
    gamma: Option<Box<RawValue>>,
    dim: usize,
    nodes: Box<RawValue>,
    weights: Box<RawValue>,
    exactness_degree: usize,
    mu0: Box<RawValue>,
}

/// A float with 17 significant digits.
pub(crate) fn raw_float(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { format!("{x:.16e}") } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

/// A float array with 17 significant digits per entry.
pub(crate) fn raw_floats(xs: &[f64]) -> Box<RawValue> {
    let body: Vec<String> = xs.iter().map(|x| raw_float(*x).get().to_string()).collect();
    RawValue::from_string(format!("[{}]", body.join(","))).expect("formatted array is valid JSON")
}

impl RuleDocument {
    pub fn to_json(&self) -> String {
        let out = RuleDocumentOut {
            kind: self.kind,
            l: self.l,
            gamma: self.gamma.map(raw_float),
            dim: self.dim,
            nodes: raw_floats(&self.nodes),
            weights: raw_floats(&self.weights),
            exactness_degree: self.exactness_degree,
            mu0: raw_float(self.mu0),
        };
        serde_json::to_string_pretty(&out).expect("rule document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RuleDocument = serde_json::from_str(text)?;
        if doc.dim == 0 || doc.nodes.len() != doc.weights.len() * doc.dim {
            return Err(Error::DimensionMismatch(format!(
                "{} node entries for {} weights in dimension {}",
                doc.nodes.len(),
                doc.weights.len(),
                doc.dim
            )));
        }
        Ok(doc)
    }

    /// Recovers a 1-d rule; fails for `dim > 1`.
    pub fn to_rule_1d(&self) -> Result<QuadratureRule1D> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch(format!("expected a 1-d rule, got dim {}", self.dim)));
        }
        let domain = match self.kind {
            RuleKind::Trig => (-std::f64::consts::PI, std::f64::consts::PI),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        Ok(QuadratureRule1D {
            kind: self.kind,
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
            domain,
            exactness_degree: self.exactness_degree,
            mu0: self.mu0,
            gamma: self.gamma,
        })
    }

    pub fn to_tensor_rule(&self) -> TensorRule {
        TensorRule {
            kind: self.kind,
            frequencies: self.nodes.clone(),
            weights: self.weights.clone(),
            dim: self.dim,
            base_l: self.l,
            exactness_degree: self.exactness_degree,
        }
    }
}
