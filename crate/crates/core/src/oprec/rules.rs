//! Rule constructors and symmetric halving.

use std::f64::consts::PI;

use super::jacobi::golub_welsch;
use super::recurrence::{stieltjes_coefficients, RecurrenceCoefficients};
use super::{QuadratureRule1D, RuleKind};
use crate::error::{Error, Result};
use crate::spectral::Density1D;

/// Trigonometric Gauss rule for the weight `gamma * p(gamma w)` on `[-pi, pi]`.
///
/// Nodes are `arccos` of the Golub-Welsch abscissae in `z = cos w`, sorted
/// ascending in `[0, pi)`. The rule integrates `cos(k w)` exactly for every
/// integer `k <= 2L - 1`, and depends only on `p` and `gamma`.
pub fn trig_rule(density: Density1D, gamma: f64, l: usize) -> Result<QuadratureRule1D> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if l == 0 {
        return Err(Error::InvalidL(l));
    }
    let coeffs = stieltjes_coefficients(|w| gamma * density.pdf(gamma * w), l)?;
    let (z, weights) = golub_welsch(&coeffs)?;
    // descending z is ascending w
    let nodes: Vec<f64> = z.iter().rev().map(|z| z.clamp(-1.0, 1.0).acos()).collect();
    let weights: Vec<f64> = weights.into_iter().rev().collect();
    Ok(QuadratureRule1D {
        kind: RuleKind::Trig,
        nodes,
        weights,
        domain: (-PI, PI),
        exactness_degree: 2 * l - 1,
        mu0: coeffs.mu0,
        gamma: Some(gamma),
    })
}

/// Gauss-Hermite rule for `exp(-x^2)` on the real line.
pub fn gauss_hermite_rule(l: usize) -> Result<QuadratureRule1D> {
    let coeffs = RecurrenceCoefficients::hermite(l)?;
    let (nodes, weights) = golub_welsch(&coeffs)?;
    Ok(QuadratureRule1D {
        kind: RuleKind::Hermite,
        nodes: symmetrize(nodes),
        weights: symmetrize_weights(weights),
        domain: (f64::NEG_INFINITY, f64::INFINITY),
        exactness_degree: 2 * l - 1,
        mu0: coeffs.mu0,
        gamma: None,
    })
}

/// Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre_rule(l: usize, a: f64, b: f64) -> Result<QuadratureRule1D> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidInterval(a, b));
    }
    let coeffs = RecurrenceCoefficients::legendre(l)?;
    let (nodes, weights) = golub_welsch(&coeffs)?;
    let (nodes, weights) = (symmetrize(nodes), symmetrize_weights(weights));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(QuadratureRule1D {
        kind: RuleKind::Legendre,
        nodes: nodes.iter().map(|t| mid + half * t).collect(),
        weights: weights.iter().map(|w| half * w).collect(),
        domain: (a, b),
        exactness_degree: 2 * l - 1,
        mu0: b - a,
        gamma: None,
    })
}

/// Averages mirrored nodes of a symmetric rule so that `x[i] == -x[n-1-i]`
/// holds bit-exactly, and pins a middle node to zero.
fn symmetrize(mut x: Vec<f64>) -> Vec<f64> {
    let n = x.len();
    for i in 0..n / 2 {
        let v = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -v;
        x[n - 1 - i] = v;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x
}

fn symmetrize_weights(mut w: Vec<f64>) -> Vec<f64> {
    let n = w.len();
    for i in 0..n / 2 {
        let v = 0.5 * (w[i] + w[n - 1 - i]);
        w[i] = v;
        w[n - 1 - i] = v;
    }
    w
}

fn check_symmetry(rule: &QuadratureRule1D) -> Result<()> {
    let n = rule.nodes.len();
    let mismatch = (0..n)
        .map(|i| (rule.nodes[i] + rule.nodes[n - 1 - i]).abs().max((rule.weights[i] - rule.weights[n - 1 - i]).abs()))
        .fold(0.0, f64::max);
    if mismatch > 1e-10 {
        return Err(Error::AsymmetricRule(mismatch));
    }
    Ok(())
}

/// Keeps the positive nodes of a symmetric rule with doubled weights.
///
/// Valid for even integrands, which is all a Fourier feature map needs.
pub fn halve_symmetric(rule: &QuadratureRule1D) -> Result<QuadratureRule1D> {
    check_symmetry(rule)?;
    if rule.nodes.len() % 2 == 1 {
        return Err(Error::OddRule);
    }
    Ok(halve(rule))
}

/// Like [`halve_symmetric`], but an odd rule keeps its zero node with the
/// undoubled weight.
pub fn halve_symmetric_odd(rule: &QuadratureRule1D) -> Result<QuadratureRule1D> {
    check_symmetry(rule)?;
    Ok(halve(rule))
}

fn halve(rule: &QuadratureRule1D) -> QuadratureRule1D {
    let n = rule.nodes.len();
    let start = n / 2;
    let mut nodes = Vec::with_capacity(n - start);
    let mut weights = Vec::with_capacity(n - start);
    for i in start..n {
        let zero = n % 2 == 1 && i == start;
        nodes.push(if zero { 0.0 } else { rule.nodes[i] });
        weights.push(if zero { rule.weights[i] } else { 2.0 * rule.weights[i] });
    }
    let mu0 = weights.iter().sum();
    QuadratureRule1D {
        kind: rule.kind,
        nodes,
        weights,
        domain: (0.0, rule.domain.1),
        exactness_degree: rule.exactness_degree,
        mu0,
        gamma: rule.gamma,
    }
}
