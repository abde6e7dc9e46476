//! Stationary kernels and their standardized spectral decompositions.
//!
//! A kernel is written as `k(tau) = g(Theta) * int p(w) cos(w^T D(Theta) tau) dw`
//! with a hyperparameter-free density `p` that factors over dimensions. For
//! the squared exponential kernel `g = nu`, `D = diag(1 / theta_j)` and `p` is
//! the standard normal density in every dimension.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::normal_upper_tail;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Se,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "rbf" => Ok(KernelFamily::Se),
            other => Err(Error::UnsupportedFamily(other.to_string())),
        }
    }
}

/// A one-dimensional, hyperparameter-free spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Density1D {
    StandardNormal,
}

impl Density1D {
    pub fn pdf(self, w: f64) -> f64 {
        match self {
            Density1D::StandardNormal => (-0.5 * w * w).exp() / (2.0 * PI).sqrt(),
        }
    }

    /// `int_a^inf p(w) dw`.
    pub fn upper_tail(self, a: f64) -> f64 {
        match self {
            Density1D::StandardNormal => normal_upper_tail(a),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Density1D::StandardNormal => rng.sample(StandardNormal),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lengthscales: Vec<f64>,
    pub scale: f64,
    pub noise: f64,
}

impl Hyperparams {
    pub fn new(lengthscales: Vec<f64>, scale: f64, noise: f64) -> Result<Self> {
        let h = Hyperparams { lengthscales, scale, noise };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidArgument("at least one length-scale is required".into()));
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !self.lengthscales.iter().all(|&t| ok(t)) || !ok(self.scale) || !ok(self.noise) {
            return Err(Error::InvalidArgument(format!("hyperparameters must be positive and finite: {self:?}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `(log theta_1, .., log theta_d, log nu, log sigma^2)`.
    pub fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|t| t.ln()).collect();
        v.push(self.scale.ln());
        v.push(self.noise.ln());
        v
    }

    pub fn from_log(v: &[f64]) -> Self {
        let d = v.len() - 2;
        Hyperparams {
            lengthscales: v[..d].iter().map(|x| x.exp()).collect(),
            scale: v[d].exp(),
            noise: v[d + 1].exp(),
        }
    }
}

/// Kernel family, hyperparameters and truncation parameter `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(flatten)]
    pub hyper: Hyperparams,
    pub gamma: f64,
    dim: usize,
}

/// `g(Theta)`, `D(Theta)` and the per-dimension standardized densities.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedSpectrum {
    pub densities: Vec<Density1D>,
    pub g: f64,
    pub d_diag: Vec<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, hyper: Hyperparams, gamma: f64) -> Result<Self> {
        hyper.validate()?;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        let dim = hyper.dim();
        Ok(KernelSpec { family, hyper, gamma, dim })
    }

    /// Squared exponential kernel.
    pub fn se(hyper: Hyperparams, gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Se, hyper, gamma)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Same family and gamma, new hyperparameters (dimension must match).
    pub fn with_hyper(&self, hyper: Hyperparams) -> Result<Self> {
        if hyper.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!("{} length-scales for a {}-d kernel", hyper.dim(), self.dim)));
        }
        Self::new(self.family, hyper, self.gamma)
    }

    /// Checks fields after deserialization.
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.dim != self.hyper.dim() {
            return Err(Error::DimensionMismatch(format!("dim {} but {} length-scales", self.dim, self.hyper.dim())));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Exact kernel value `k(tau)`.
    pub fn kernel_eval(&self, tau: &[f64]) -> f64 {
        debug_assert_eq!(tau.len(), self.dim);
        match self.family {
            KernelFamily::Se => {
                let r2: f64 = tau.iter().zip(&self.hyper.lengthscales).map(|(t, l)| (t / l) * (t / l)).sum();
                self.hyper.scale * (-0.5 * r2).exp()
            }
        }
    }

    pub fn standardized_density(&self) -> Result<StandardizedSpectrum> {
        match self.family {
            KernelFamily::Se => Ok(StandardizedSpectrum {
                densities: vec![Density1D::StandardNormal; self.dim],
                g: self.hyper.scale,
                d_diag: self.hyper.lengthscales.iter().map(|t| 1.0 / t).collect(),
            }),
        }
    }

    /// `g(Theta)`.
    pub fn amplitude(&self) -> f64 {
        match self.family {
            KernelFamily::Se => self.hyper.scale,
        }
    }

    /// `C_d(Theta) = g(Theta) * d * 2^(d-1)`.
    pub fn tensor_constant(&self) -> f64 {
        self.amplitude() * self.dim as f64 * 2f64.powi(self.dim as i32 - 1)
    }

    /// `2 C_d int_pi^inf p_gamma(gamma w) dw`, i.e. `2 C_d (1 - P(gamma pi))`.
    pub fn truncation_tail(&self) -> f64 {
        let density = match self.family {
            KernelFamily::Se => Density1D::StandardNormal,
        };
        2.0 * self.tensor_constant() * density.upper_tail(self.gamma * PI)
    }

    /// `M = ceil(gamma / min_j theta_j)`; ratios within 1e-12 of an
    /// integer are snapped so that e.g. `1.15 / 0.05` yields 23.
    pub fn bandwidth_index(&self) -> u64 {
        let min_theta = self.hyper.lengthscales.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = self.gamma / min_theta;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-12 * ratio.max(1.0) {
            nearest.max(1.0) as u64
        } else {
            ratio.ceil().max(1.0) as u64
        }
    }

    /// Uniform bound on `|k(x - x') - Phi(x)^T Phi(x')|` over `[0, 1]^d` for a
    /// trigonometric rule of exactness `2L - 1` in each dimension.
    ///
    /// Factorials are evaluated through `ln Gamma`; an overflowing result is
    /// returned as `+inf`.
    pub fn tqff_error_bound(&self, l: usize) -> Result<f64> {
        if l == 0 {
            return Err(Error::InvalidL(l));
        }
        let m = self.bandwidth_index() as f64;
        let two_l = 2.0 * l as f64;
        let h = m.max(two_l - 1.0);
        let r = (two_l - m).max(1.0);
        let log_ratio = libm::lgamma(h + 1.0) - libm::lgamma(m) - r * two_l.ln() - 2f64.ln();
        let prefactor = PI + 4.0 + 2.0 * ((2.0 / PI) * (4.0 * l as f64 - 1.0)).ln();
        let quad = self.tensor_constant() * prefactor * log_ratio.exp();
        let total = self.truncation_tail() + quad;
        Ok(if total.is_finite() { total } else { f64::INFINITY })
    }
}
