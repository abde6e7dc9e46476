//! Half-space tensor products of mirrored 1-d rules.

use super::{QuadratureRule1D, RuleKind};
use crate::error::{Error, Result};

/// Tensor-product rule over the half-space index set.
///
/// `frequencies` is `S x dim`, row-major. No stored frequency has its
/// negation stored. The factor 2 that accounts for the omitted mirror half
/// is folded into `weights`, so for an even integrand `f`,
/// `sum_i weights[i] * f(frequencies[i])` is the full tensor quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRule {
    pub kind: RuleKind,
    pub frequencies: Vec<f64>,
    pub weights: Vec<f64>,
    pub dim: usize,
    pub base_l: usize,
    pub exactness_degree: usize,
}

impl TensorRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn frequency(&self, i: usize) -> &[f64] {
        &self.frequencies[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.frequencies.chunks_exact(self.dim)
    }

    /// Applies the rule to an even integrand.
    pub fn integrate_even<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.rows().zip(&self.weights).map(|(w, a)| a * f(w)).sum()
    }

    /// Total weight, i.e. the product of the 1-d masses.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn to_document(&self, gamma: Option<f64>) -> super::RuleDocument {
        super::RuleDocument {
            kind: self.kind,
            l: self.base_l,
            gamma,
            dim: self.dim,
            nodes: self.frequencies.clone(),
            weights: self.weights.clone(),
            exactness_degree: self.exactness_degree,
            mu0: self.mass(),
        }
    }
}

/// Mirrors each 1-d rule to signed indices `+-1..+-L` and keeps the
/// multi-indices whose first entry is positive.
///
/// Weight of multi-index `i` is `2 * prod_j a_{i_j, j} / 2`. The result has
/// `(2L)^d / 2` frequencies. All rules must share a kind and node count, and
/// every node must be strictly positive.
pub fn tensor_product(rules: &[QuadratureRule1D]) -> Result<TensorRule> {
    let first = rules.first().ok_or_else(|| Error::DimensionMismatch("no rules given".into()))?;
    let l = first.len();
    let kind = first.kind;
    if l == 0 {
        return Err(Error::InvalidL(0));
    }
    for r in rules {
        if r.len() != l || r.weights.len() != l {
            return Err(Error::DimensionMismatch(format!("rules with {} and {} nodes", l, r.len())));
        }
        if r.kind != kind {
            return Err(Error::DimensionMismatch(format!("mixed rule kinds {:?} and {:?}", kind, r.kind)));
        }
        if let Some(i) = r.nodes.iter().position(|x| x.abs() <= 1e-12) {
            return Err(Error::NodeAtZero(i));
        }
        if let Some(&x) = r.nodes.iter().find(|&&x| x < 0.0) {
            return Err(Error::InvalidArgument(format!("negative node {x}; pass the positive half of the rule")));
        }
    }
    let d = rules.len();

    // signed nodes per dimension: -w_L .. -w_1, w_1 .. w_L
    let signed: Vec<Vec<(f64, f64)>> = rules
        .iter()
        .map(|r| {
            let neg = r.nodes.iter().zip(&r.weights).rev().map(|(&w, &a)| (-w, 0.5 * a));
            let pos = r.nodes.iter().zip(&r.weights).map(|(&w, &a)| (w, 0.5 * a));
            neg.chain(pos).collect()
        })
        .collect();

    let count = l * (2 * l).pow(d as u32 - 1);
    let mut frequencies = Vec::with_capacity(count * d);
    let mut weights = Vec::with_capacity(count);
    // odometer; dimension 0 only runs over the positive half
    let mut idx = vec![0usize; d];
    idx[0] = l;
    loop {
        let mut a = 2.0;
        for (j, &i) in idx.iter().enumerate() {
            let (w, half) = signed[j][i];
            frequencies.push(w);
            a *= half;
        }
        weights.push(a);
        let mut j = d;
        loop {
            if j == 0 {
                debug_assert_eq!(weights.len(), count);
                return Ok(TensorRule {
                    kind,
                    frequencies,
                    weights,
                    dim: d,
                    base_l: l,
                    exactness_degree: rules.iter().map(|r| r.exactness_degree).min().unwrap_or(0),
                });
            }
            j -= 1;
            if idx[j] + 1 < 2 * l {
                idx[j] += 1;
                break;
            }
            idx[j] = if j == 0 { l } else { 0 };
        }
    }
}
