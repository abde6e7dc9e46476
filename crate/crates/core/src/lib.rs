//! Fourier feature Gaussian process regression with trigonometric quadrature.

pub mod data;
pub mod error;
pub mod featmap;
pub mod gp;
pub mod oprec;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
pub use oprec::{QuadratureRule1D, RuleKind, TensorRule};
pub use spectral::{Density1D, Hyperparams, KernelFamily, KernelSpec};
pub use featmap::{build_feature_map, FeatureMap, Method};
pub use data::{Dataset, Normalization};
pub use gp::{AdamConfig, FeatureGp, GpModel, Metrics, PredictiveDistribution};
