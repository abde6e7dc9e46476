//! Three-term recurrence coefficients and the discretized Stieltjes procedure.

use std::f64::consts::PI;

use super::jacobi::golub_welsch;
use super::RuleKind;
use crate::error::{Error, Result};

/// Coefficients of the monic recurrence
/// `q_{k+1}(z) = (z - B_k) q_k(z) - A_k q_{k-1}(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceCoefficients {
    pub kind: RuleKind,
    /// `B_0 .. B_{L-1}`
    pub diag: Vec<f64>,
    /// `A_1 .. A_{L-1}`
    pub offdiag_sq: Vec<f64>,
    /// Total mass of the weight.
    pub mu0: f64,
}

impl RecurrenceCoefficients {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.diag.is_empty() {
            return Err(Error::InvalidL(0));
        }
        if self.offdiag_sq.len() + 1 != self.diag.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} diagonal vs {} off-diagonal coefficients",
                self.diag.len(),
                self.offdiag_sq.len()
            )));
        }
        if !(self.mu0 > 0.0) {
            return Err(Error::NonPositiveMoment { k: 0, value: self.mu0 });
        }
        if let Some((k, &a)) = self.offdiag_sq.iter().enumerate().find(|(_, a)| !(**a > 0.0)) {
            return Err(Error::NonPositiveMoment { k: k + 1, value: a });
        }
        Ok(())
    }

    /// Hermite weight `exp(-x^2)` on the real line.
    pub fn hermite(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidL(l));
        }
        Ok(RecurrenceCoefficients {
            kind: RuleKind::Hermite,
            diag: vec![0.0; l],
            offdiag_sq: (1..l).map(|k| k as f64 / 2.0).collect(),
            mu0: PI.sqrt(),
        })
    }

    /// Legendre weight `1` on `[-1, 1]`.
    pub fn legendre(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidL(l));
        }
        Ok(RecurrenceCoefficients {
            kind: RuleKind::Legendre,
            diag: vec![0.0; l],
            offdiag_sq: (1..l)
                .map(|k| {
                    let k2 = (k * k) as f64;
                    k2 / (4.0 * k2 - 1.0)
                })
                .collect(),
            mu0: 2.0,
        })
    }
}

/// Discretization of the cosine inner product used by [`stieltjes_coefficients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    /// Composite Gauss-Legendre panels over `[0, pi]` on the first pass.
    pub panels: usize,
    /// Gauss-Legendre points per panel.
    pub points: usize,
    /// Stop doubling once no coefficient moves by more than this.
    pub tol: f64,
    /// Hard cap on the panel count.
    pub max_panels: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization { panels: 64, points: 32, tol: 1e-13, max_panels: 4096 }
    }
}

/// Discrete measure in `z = cos(w)` approximating `w(w) dw` on `[-pi, pi]`.
fn discrete_cosine_measure<W: Fn(f64) -> f64>(weight: &W, panels: usize, nodes: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let points = nodes.len();
    let h = PI / panels as f64;
    let mut z = Vec::with_capacity(panels * points);
    let mut lambda = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let centre = (p as f64 + 0.5) * h;
        for (t, wt) in nodes.iter().zip(weights) {
            let w = centre + 0.5 * h * t;
            // factor 2: the even weight on [-pi, 0] folds onto [0, pi]
            let mass = 2.0 * weight(w) * 0.5 * h * wt;
            z.push(w.cos());
            lambda.push(mass);
        }
    }
    (z, lambda)
}

/// Lanczos form of the Stieltjes procedure on a discrete measure, with full
/// reorthogonalization.
fn discrete_stieltjes(z: &[f64], lambda: &[f64], l: usize) -> Result<RecurrenceCoefficients> {
    let n = z.len();
    let mu0: f64 = lambda.iter().sum();
    if !(mu0 > 0.0) {
        return Err(Error::NonPositiveMoment { k: 0, value: mu0 });
    }
    let norm0 = mu0.sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(l);
    basis.push(lambda.iter().map(|m| m.max(0.0).sqrt() / norm0).collect());
    let mut diag = Vec::with_capacity(l);
    let mut offdiag_sq = Vec::with_capacity(l.saturating_sub(1));
    let mut beta = 0.0;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for k in 0..l {
        let q = &basis[k];
        let mut v: Vec<f64> = q.iter().zip(z).map(|(qi, zi)| qi * zi).collect();
        let b = dot(q, &v);
        diag.push(b);
        if k + 1 == l {
            break;
        }
        for i in 0..n {
            v[i] -= b * q[i];
        }
        if k > 0 {
            let prev = &basis[k - 1];
            for i in 0..n {
                v[i] -= beta * prev[i];
            }
        }
        for _ in 0..2 {
            for qj in &basis {
                let c = dot(qj, &v);
                for i in 0..n {
                    v[i] -= c * qj[i];
                }
            }
        }
        let a = dot(&v, &v);
        if !(a > f64::MIN_POSITIVE) || !a.is_finite() {
            return Err(Error::NonPositiveMoment { k: k + 1, value: a });
        }
        offdiag_sq.push(a);
        beta = a.sqrt();
        basis.push(v.into_iter().map(|x| x / beta).collect());
    }
    Ok(RecurrenceCoefficients { kind: RuleKind::Trig, diag, offdiag_sq, mu0 })
}

fn max_change(a: &RecurrenceCoefficients, b: &RecurrenceCoefficients) -> f64 {
    let d = a.diag.iter().zip(&b.diag).map(|(x, y)| (x - y).abs());
    let o = a.offdiag_sq.iter().zip(&b.offdiag_sq).map(|(x, y)| (x - y).abs());
    d.chain(o).fold((a.mu0 - b.mu0).abs(), f64::max)
}

/// Recurrence coefficients of the monic cosine polynomials orthogonal under
/// `<f, g> = int_{-pi}^{pi} f g w(w) dw`, for an even, nonnegative weight.
///
/// Inner products are evaluated on a composite Gauss-Legendre grid over
/// `[0, pi]`; the grid is refined by doubling until the coefficients settle.
pub fn stieltjes_coefficients<W: Fn(f64) -> f64>(weight: W, l: usize) -> Result<RecurrenceCoefficients> {
    stieltjes_coefficients_with(weight, l, Discretization::default())
}

pub fn stieltjes_coefficients_with<W: Fn(f64) -> f64>(
    weight: W,
    l: usize,
    disc: Discretization,
) -> Result<RecurrenceCoefficients> {
    if l == 0 {
        return Err(Error::InvalidL(l));
    }
    if disc.points == 0 || disc.panels == 0 {
        return Err(Error::InvalidArgument(format!("unsupported discretization {disc:?}")));
    }
    let (nodes, weights) = golub_welsch(&RecurrenceCoefficients::legendre(disc.points)?)?;
    let mut panels = disc.panels;
    let (z, lambda) = discrete_cosine_measure(&weight, panels, &nodes, &weights);
    let mut current = discrete_stieltjes(&z, &lambda, l)?;
    while panels * 2 <= disc.max_panels {
        panels *= 2;
        let (z, lambda) = discrete_cosine_measure(&weight, panels, &nodes, &weights);
        let refined = discrete_stieltjes(&z, &lambda, l)?;
        let change = max_change(&current, &refined);
        current = refined;
        if change <= disc.tol {
            break;
        }
    }
    current.validate()?;
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::truncated_cosine_moment;
    use crate::spectral::Density1D;

    /// Gram-Schmidt of the monomials `z^k` in the Chebyshev basis
    /// `T_j(z) = cos(j w)`, with inner products from oracle moments.
    fn oracle_coefficients(gamma: f64, l: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let kmax = 2 * l + 2;
        let m: Vec<f64> = (0..=kmax)
            .map(|k| truncated_cosine_moment(Density1D::StandardNormal, gamma, k as f64).unwrap())
            .collect();
        let dim = l + 2;
        // <T_i, T_j> = (m_{i+j} + m_{|i-j|}) / 2
        let gram = |a: &[f64], b: &[f64]| {
            let mut s = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    if a[i] != 0.0 && b[j] != 0.0 {
                        s += a[i] * b[j] * 0.5 * (m[i + j] + m[i.abs_diff(j)]);
                    }
                }
            }
            s
        };
        // multiply a Chebyshev series by z: z T_j = (T_{j+1} + T_{|j-1|}) / 2
        let times_z = |a: &[f64]| {
            let mut out = vec![0.0; dim];
            for j in 0..dim - 1 {
                out[j + 1] += 0.5 * a[j];
                out[j.abs_diff(1)] += 0.5 * a[j];
            }
            out
        };
        let mut monomial = vec![0.0; dim];
        monomial[0] = 1.0;
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for _ in 0..=l {
            let mut v = monomial.clone();
            for q in &ortho {
                let c = gram(&v, q) / gram(q, q);
                for i in 0..dim {
                    v[i] -= c * q[i];
                }
            }
            ortho.push(v);
            monomial = times_z(&monomial);
        }
        let norms: Vec<f64> = ortho.iter().map(|q| gram(q, q)).collect();
        let b: Vec<f64> = (0..l).map(|k| gram(&times_z(&ortho[k]), &ortho[k]) / norms[k]).collect();
        let a: Vec<f64> = (1..l).map(|k| norms[k] / norms[k - 1]).collect();
        (b, a, m[0])
    }

    fn se_weight(gamma: f64) -> impl Fn(f64) -> f64 {
        move |w| gamma * Density1D::StandardNormal.pdf(gamma * w)
    }

    #[test]
    fn uniform_weight_single_node() {
        let c = stieltjes_coefficients(|_| 1.0 / (2.0 * PI), 1).unwrap();
        assert!((c.mu0 - 1.0).abs() < 1e-13, "mu0 = {}", c.mu0);
        assert!(c.diag[0].abs() < 1e-14);
    }

    #[test]
    fn uniform_weight_is_chebyshev_first_kind() {
        // cos-polynomials under a flat weight are Chebyshev T_k: B = 0, A_1 = 1/2, A_k = 1/4
        let c = stieltjes_coefficients(|_| 1.0, 6).unwrap();
        assert!(c.diag.iter().all(|b| b.abs() < 1e-14));
        assert!((c.offdiag_sq[0] - 0.5).abs() < 1e-14);
        assert!(c.offdiag_sq[1..].iter().all(|a| (a - 0.25).abs() < 1e-14));
    }

    #[test]
    fn se_coefficients_are_positive() {
        let c = stieltjes_coefficients(se_weight(1.15), 10).unwrap();
        assert!(c.offdiag_sq.iter().all(|a| a.is_finite() && *a > 0.0));
    }

    #[test]
    fn se_coefficients_match_moment_gram_schmidt() {
        let l = 5;
        let c = stieltjes_coefficients(se_weight(1.15), l).unwrap();
        let (b, a, mu0) = oracle_coefficients(1.15, l);
        assert!((c.mu0 - mu0).abs() < 1e-10);
        for k in 0..l {
            assert!((c.diag[k] - b[k]).abs() < 1e-10, "B_{k}: {} vs {}", c.diag[k], b[k]);
        }
        for k in 0..l - 1 {
            assert!((c.offdiag_sq[k] - a[k]).abs() < 1e-10, "A_{}: {} vs {}", k + 1, c.offdiag_sq[k], a[k]);
        }
    }

    #[test]
    fn zero_l_is_rejected() {
        assert!(matches!(stieltjes_coefficients(|_| 1.0, 0), Err(Error::InvalidL(0))));
        assert!(matches!(RecurrenceCoefficients::hermite(0), Err(Error::InvalidL(0))));
    }

    #[test]
    fn validate_catches_bad_coefficients() {
        let mut c = RecurrenceCoefficients::legendre(3).unwrap();
        c.offdiag_sq[1] = 0.0;
        assert!(matches!(c.validate(), Err(Error::NonPositiveMoment { k: 2, .. })));
        c.offdiag_sq.pop();
        assert!(matches!(c.validate(), Err(Error::DimensionMismatch(_))));
    }
}
