//! Golub-Welsch: quadrature from the symmetric tridiagonal Jacobi matrix.

use super::recurrence::RecurrenceCoefficients;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Eigenvalues of the symmetric tridiagonal matrix (`diag`, `off`) and the
/// first component of each unit eigenvector, by implicit-shift QL.
///
/// `off[i]` couples rows `i` and `i + 1`; only the first row of the
/// eigenvector matrix is accumulated.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) -> Result<()> {
    let n = diag.len();
    debug_assert_eq!(off.len(), n);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::EigenFailure(l));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// Nodes (ascending) and weights of the Gauss rule for the given recurrence.
///
/// Nodes are eigenvalues of the Jacobi matrix with diagonal `B_k` and
/// off-diagonal `sqrt(A_k)`; weight `i` is `mu0` times the squared first
/// component of eigenvector `i`. For cosine recurrences every node must lie
/// strictly inside `(-1, 1)`.
pub fn golub_welsch(coeffs: &RecurrenceCoefficients) -> Result<(Vec<f64>, Vec<f64>)> {
    coeffs.validate()?;
    let n = coeffs.len();
    let mut diag = coeffs.diag.clone();
    let mut off: Vec<f64> = coeffs.offdiag_sq.iter().map(|a| a.sqrt()).collect();
    off.push(0.0);
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let nodes: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let weights: Vec<f64> = order.iter().map(|&i| coeffs.mu0 * first[i] * first[i]).collect();

    if coeffs.kind == super::RuleKind::Trig {
        if let Some((index, &value)) = nodes.iter().enumerate().find(|(_, z)| z.abs() >= 1.0 - 1e-12) {
            return Err(Error::AbscissaOutOfRange { index, value });
        }
    }
    Ok((nodes, weights))
}
