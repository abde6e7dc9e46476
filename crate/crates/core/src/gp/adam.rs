//! Adam on log-domain hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub iters: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Recorded for reproducibility; the optimizer itself is deterministic.
    #[serde(default)]
    pub seed: u64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.01, iters: 1000, beta1: 0.9, beta2: 0.999, eps: 1e-8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptTrace {
    /// Parameters after the last step.
    pub x: Vec<f64>,
    /// Loss before each step, then the loss at `x`.
    pub losses: Vec<f64>,
}

/// Minimizes `f`, which returns the loss and its gradient.
pub fn adam_minimize<F>(mut f: F, x0: &[f64], cfg: &AdamConfig) -> Result<OptTrace>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0.to_vec();
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let mut losses = Vec::with_capacity(cfg.iters + 1);
    for t in 0..cfg.iters {
        let (loss, grad) = f(&x)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss(t));
        }
        losses.push(loss);
        let b1t = 1.0 - cfg.beta1.powi(t as i32 + 1);
        let b2t = 1.0 - cfg.beta2.powi(t as i32 + 1);
        for i in 0..x.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            x[i] -= cfg.lr * (m[i] / b1t) / ((v[i] / b2t).sqrt() + cfg.eps);
        }
    }
    let (loss, _) = f(&x)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(cfg.iters));
    }
    losses.push(loss);
    Ok(OptTrace { x, losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_iterations_is_identity() {
        let cfg = AdamConfig { iters: 0, ..AdamConfig::default() };
        let t = adam_minimize(|x| Ok((x[0] * x[0], vec![2.0 * x[0]])), &[3.0], &cfg).unwrap();
        assert_eq!(t.x, vec![3.0]);
        assert_eq!(t.losses, vec![9.0]);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let cfg = AdamConfig { lr: 0.1, iters: 2000, ..AdamConfig::default() };
        let f = |x: &[f64]| Ok(((x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2), vec![2.0 * (x[0] - 1.0), 6.0 * (x[1] + 2.0)]));
        let t = adam_minimize(f, &[0.0, 0.0], &cfg).unwrap();
        assert!((t.x[0] - 1.0).abs() < 1e-3 && (t.x[1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn non_finite_loss_reports_iteration() {
        let cfg = AdamConfig { lr: 1.0, iters: 10, ..AdamConfig::default() };
        let f = |x: &[f64]| Ok((if x[0] > 1.5 { f64::NAN } else { -x[0] }, vec![-1.0]));
        assert!(matches!(adam_minimize(f, &[0.0], &cfg), Err(Error::NonFiniteLoss(2))));
    }
}
