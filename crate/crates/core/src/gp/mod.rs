//! Gaussian process regression: exact (dense) and in feature space.

mod adam;
mod exact;
mod feature;
mod metrics;

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, MatMut, Par, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_minimize, AdamConfig, OptTrace};
pub use exact::{
    cross_kernel, dense_gp_loglik, dense_gp_predict, full_gp_fit, full_gp_loglik, full_gp_loglik_grad, full_gp_predict,
    initial_hyper, kernel_matrix, FULL_GP_CAP,
};
pub use feature::{ff_fit, ff_loglik, ff_loglik_grad, ff_predict, FeatureGp, GpModel};
pub use metrics::{kl_gaussian, metrics, Metrics};

/// Per-point Gaussian predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub means: Vec<f64>,
    /// Observation level, including the noise variance.
    pub variances: Vec<f64>,
    /// Latent function only.
    pub latent_variances: Vec<f64>,
}

impl PredictiveDistribution {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Maps predictions of normalized targets back to raw units.
    pub fn denormalize(&self, norm: &crate::data::Normalization) -> PredictiveDistribution {
        let s2 = norm.y_sd * norm.y_sd;
        PredictiveDistribution {
            means: self.means.iter().map(|m| norm.inverse(*m)).collect(),
            variances: self.variances.iter().map(|v| v * s2).collect(),
            latent_variances: self.latent_variances.iter().map(|v| v * s2).collect(),
        }
    }

    pub fn sd_obs(&self) -> Vec<f64> {
        self.variances.iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn sd_latent(&self) -> Vec<f64> {
        self.latent_variances.iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    pub l: Mat<f64>,
    /// Diagonal shift that was needed, zero if none.
    pub jitter: f64,
}

impl Factor {
    /// Factors `a`, retrying with `jitter_scale * 1e-8, 1e-7, .., 1e-4` added
    /// to the diagonal if the plain factorization fails.
    pub fn new(a: &Mat<f64>, jitter_scale: f64) -> Result<Factor> {
        if let Ok(llt) = a.llt(Side::Lower) {
            return Ok(Factor { l: llt.L().to_owned(), jitter: 0.0 });
        }
        let mut jitter = 1e-8 * jitter_scale;
        while jitter <= 1e-4 * jitter_scale * (1.0 + 1e-9) {
            let mut b = a.clone();
            for i in 0..b.nrows() {
                b[(i, i)] += jitter;
            }
            if let Ok(llt) = b.llt(Side::Lower) {
                return Ok(Factor { l: llt.L().to_owned(), jitter });
            }
            jitter *= 10.0;
        }
        Err(Error::CholeskyFailure { jitter: jitter / 10.0 })
    }

    /// Factors without any jitter.
    #[cfg(test)]
    pub fn exact(a: &Mat<f64>) -> Result<Factor> {
        let llt = a.llt(Side::Lower).map_err(|_| Error::CholeskyFailure { jitter: 0.0 })?;
        Ok(Factor { l: llt.L().to_owned(), jitter: 0.0 })
    }

    pub fn from_lower(l: Mat<f64>) -> Factor {
        Factor { l, jitter: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// `L^{-1} B` in place.
    pub fn half_solve_in_place(&self, b: MatMut<'_, f64>) {
        solve_lower_triangular_in_place(self.l.as_ref(), b, Par::Seq);
    }

    /// `A^{-1} B` in place.
    pub fn solve_in_place(&self, mut b: MatMut<'_, f64>) {
        solve_lower_triangular_in_place(self.l.as_ref(), b.as_mut(), Par::Seq);
        solve_upper_triangular_in_place(self.l.transpose(), b, Par::Seq);
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.solve_in_place(m.as_mut());
        m.col_as_slice(0).to_vec()
    }

    pub fn inverse(&self) -> Mat<f64> {
        let n = self.dim();
        let mut m = Mat::<f64>::identity(n, n);
        self.solve_in_place(m.as_mut());
        m
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;
