//! Predictive accuracy and divergence.

use super::{PredictiveDistribution, LN_2PI};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    /// Mean negative log predictive density at observation level.
    pub nll: f64,
}

pub fn metrics(pred: &PredictiveDistribution, y: &[f64]) -> Result<Metrics> {
    if pred.len() != y.len() {
        return Err(Error::LengthMismatch(pred.len(), y.len()));
    }
    if y.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = y.len() as f64;
    let mut se = 0.0;
    let mut nll = 0.0;
    for ((m, v), t) in pred.means.iter().zip(&pred.variances).zip(y) {
        if !(*v > 0.0) {
            return Err(Error::InvalidArgument(format!("non-positive predictive variance {v}")));
        }
        let r = t - m;
        se += r * r;
        nll += 0.5 * (LN_2PI + v.ln() + r * r / v);
    }
    Ok(Metrics { rmse: (se / n).sqrt(), nll: nll / n })
}

/// `KL(p_i || q_i)` between univariate Gaussians at observation level.
pub fn kl_gaussian(p: &PredictiveDistribution, q: &PredictiveDistribution) -> Result<Vec<f64>> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    p.means
        .iter()
        .zip(&p.variances)
        .zip(q.means.iter().zip(&q.variances))
        .map(|((mp, vp), (mq, vq))| {
            if !(*vp > 0.0 && *vq > 0.0) {
                return Err(Error::InvalidArgument("non-positive variance in KL".into()));
            }
            let d = mp - mq;
            let kl = 0.5 * ((vq / vp).ln() + (vp + d * d) / vq - 1.0);
            Ok(kl.max(0.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn pd(means: Vec<f64>, vars: Vec<f64>) -> PredictiveDistribution {
        PredictiveDistribution { latent_variances: vars.clone(), means, variances: vars }
    }

    #[test]
    fn kl_closed_forms() {
        let p = pd(vec![0.0, 0.3], vec![1.0, 2.0]);
        assert_eq!(kl_gaussian(&p, &p).unwrap(), vec![0.0, 0.0]);
        let q = pd(vec![1.0], vec![1.0]);
        assert_eq!(kl_gaussian(&pd(vec![0.0], vec![1.0]), &q).unwrap(), vec![0.5]);
        assert!(matches!(kl_gaussian(&p, &q), Err(Error::LengthMismatch(2, 1))));
    }

    #[test]
    fn rmse_and_length_check() {
        let p = pd(vec![0.0, 0.0], vec![1.0, 1.0]);
        let m = metrics(&p, &[3.0, 4.0]).unwrap();
        assert!((m.rmse - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(metrics(&p, &[1.0]), Err(Error::LengthMismatch(2, 1))));
    }

    #[test]
    fn nll_of_own_draws_is_entropy() {
        let var: f64 = 0.7;
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<f64> = (0..n).map(|_| 1.5 + var.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
        let p = pd(vec![1.5; n], vec![var; n]);
        let nll = metrics(&p, &y).unwrap().nll;
        let entropy = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).ln();
        // per-point nll has sd 1/sqrt(2); allow 4 standard errors
        assert!((nll - entropy).abs() < 4.0 * 0.7072 / (n as f64).sqrt());
    }
}
