//! GP regression in a Fourier feature space.
//!
//! With `Lambda = [Phi(x_1) .. Phi(x_n)]` (`2S x n`), every quantity is
//! computed through `A = Lambda Lambda^T + sigma^2 I`, so the cost is
//! `O(n S^2 + S^3)`.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use super::adam::{adam_minimize, AdamConfig};
use super::{dot, Factor, PredictiveDistribution, LN_2PI};
use crate::data::{Dataset, Normalization};
use crate::error::{Error, Result};
use crate::featmap::{FeatureMap, MapDocument, Method};
use crate::spectral::Hyperparams;

/// Everything the likelihood and its gradient share.
struct Solved {
    lambda: Mat<f64>,
    factor: Factor,
    alpha: Vec<f64>,
    loglik: f64,
}

fn check_data(map: &FeatureMap, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.dim() != map.dim() {
        return Err(Error::DimensionMismatch(format!("{}-d data for a {}-d feature map", data.dim(), map.dim())));
    }
    Ok(())
}

fn solve(map: &FeatureMap, data: &Dataset) -> Result<Solved> {
    check_data(map, data)?;
    let n = data.len();
    let m = map.feature_len();
    let noise = map.spec.hyper.noise;
    let lambda = map.design_matrix(data.x.as_ref());
    let mut a = Mat::<f64>::identity(m, m) * faer::Scale(noise);
    matmul(a.as_mut(), Accum::Add, lambda.as_ref(), lambda.transpose(), 1.0, Par::Seq);
    let factor = Factor::new(&a, map.spec.hyper.scale.max(noise))?;
    let y = &data.y;
    let b: Vec<f64> = (0..m).map(|k| (0..n).map(|i| lambda[(k, i)] * y[i]).sum()).collect();
    let alpha = factor.solve_vec(&b);
    let quad = (dot(y, y) - dot(&b, &alpha)) / noise;
    let logdet = factor.logdet() + (n as f64 - m as f64) * noise.ln();
    let loglik = -0.5 * (quad + logdet + n as f64 * LN_2PI);
    Ok(Solved { lambda, factor, alpha, loglik })
}

/// Feature-space log marginal likelihood `log N(y; 0, Lambda^T Lambda + sigma^2 I)`.
pub fn ff_loglik(map: &FeatureMap, data: &Dataset) -> Result<f64> {
    Ok(solve(map, data)?.loglik)
}

/// Log marginal likelihood and its gradient in
/// `(log theta_1.., log nu, log sigma^2)`, frequencies held fixed.
pub fn ff_loglik_grad(map: &FeatureMap, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    let Solved { lambda, factor, alpha, loglik } = solve(map, data)?;
    let n = data.len();
    let s = map.len();
    let d = map.dim();
    let noise = map.spec.hyper.noise;
    let y = &data.y;

    // r = y - Lambda^T alpha
    let r: Vec<f64> = (0..n).map(|i| y[i] - dot(lambda.col_as_slice(i), &alpha)).collect();
    // W = dL/dLambda = alpha r^T / sigma^2 - A^{-1} Lambda
    let mut w = lambda.clone();
    factor.solve_in_place(w.as_mut());
    for i in 0..n {
        let ri = r[i] / noise;
        for (wk, ak) in w.col_as_slice_mut(i).iter_mut().zip(&alpha) {
            *wk = ak * ri - *wk;
        }
    }

    let mut grad = vec![0.0; d + 2];
    let scale = map.input_scale();
    for i in 0..n {
        let lc = lambda.col_as_slice(i);
        let wc = w.col_as_slice(i);
        for k in 0..s {
            // d Lambda_cos / d log theta_j = q Lambda_sin, d Lambda_sin / d log theta_j = -q Lambda_cos
            let t = wc[k] * lc[s + k] - wc[s + k] * lc[k];
            for j in 0..d {
                grad[j] += t * map.frequencies[k * d + j] * scale[j] * data.x[(i, j)];
            }
        }
        grad[d] += 0.5 * dot(wc, lc);
    }
    let tr_inv: f64 = {
        let inv = factor.inverse();
        (0..inv.nrows()).map(|k| inv[(k, k)]).sum()
    };
    grad[d + 1] = 0.5 * (dot(&r, &r) / noise - (n as f64 - 2.0 * s as f64) - noise * tr_inv);
    Ok((loglik, grad))
}

/// A feature-space GP conditioned on data, with the factor of `A` and the
/// weight-space posterior mean `alpha = A^{-1} Lambda y` cached.
#[derive(Debug, Clone)]
pub struct FeatureGp {
    pub map: FeatureMap,
    factor: Factor,
    pub alpha: Vec<f64>,
    /// Applied to the training targets; predictions are in these units.
    pub normalization: Normalization,
}

impl FeatureGp {
    pub fn condition(map: FeatureMap, data: &Dataset) -> Result<FeatureGp> {
        let Solved { factor, alpha, .. } = solve(&map, data)?;
        Ok(FeatureGp { map, factor, alpha, normalization: data.normalization })
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.map.spec.hyper
    }

    /// Lower Cholesky factor of `A`.
    pub fn cholesky(&self) -> MatRef<'_, f64> {
        self.factor.l.as_ref()
    }

    /// Predictions in normalized target units.
    pub fn predict(&self, xs: MatRef<'_, f64>) -> Result<PredictiveDistribution> {
        if xs.ncols() != self.map.dim() {
            return Err(Error::DimensionMismatch(format!("{}-d test inputs for a {}-d model", xs.ncols(), self.map.dim())));
        }
        let noise = self.map.spec.hyper.noise;
        let phi = self.map.design_matrix(xs);
        let mut v = phi.clone();
        self.factor.half_solve_in_place(v.as_mut());
        let m = xs.nrows();
        let mut means = Vec::with_capacity(m);
        let mut latent = Vec::with_capacity(m);
        for j in 0..m {
            means.push(dot(phi.col_as_slice(j), &self.alpha));
            let c = v.col_as_slice(j);
            latent.push(noise * dot(c, c));
        }
        let variances = latent.iter().map(|v| v + noise).collect();
        Ok(PredictiveDistribution { means, variances, latent_variances: latent })
    }

    /// Predictions in the raw units of the training targets.
    pub fn predict_raw(&self, xs: MatRef<'_, f64>) -> Result<PredictiveDistribution> {
        Ok(self.predict(xs)?.denormalize(&self.normalization))
    }
}

/// A fitted feature-space GP together with how it was trained.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub gp: FeatureGp,
    pub optimizer: AdamConfig,
    /// Negative log-likelihood before each step and after the last.
    pub losses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    map: MapDocument,
    hyper: Hyperparams,
    opt: AdamConfig,
    normalization: Normalization,
    losses: Vec<f64>,
    /// Lower factor of `A`, row-major.
    cholesky: Vec<f64>,
    jitter: f64,
    alpha: Vec<f64>,
}

impl GpModel {
    pub fn method(&self) -> Method {
        self.gp.map.method
    }

    pub fn predict(&self, xs: MatRef<'_, f64>) -> Result<PredictiveDistribution> {
        self.gp.predict(xs)
    }

    pub fn to_json(&self) -> String {
        let l = &self.gp.factor.l;
        let m = l.nrows();
        let doc = ModelDocument {
            map: self.gp.map.document(),
            hyper: self.gp.map.spec.hyper.clone(),
            opt: self.optimizer,
            normalization: self.gp.normalization,
            losses: self.losses.clone(),
            cholesky: (0..m * m).map(|k| l[(k / m, k % m)]).collect(),
            jitter: self.gp.factor.jitter,
            alpha: self.gp.alpha.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<GpModel> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        let map = doc.map.into_map()?;
        let map = map.with_hyper(doc.hyper)?;
        let m = map.feature_len();
        if doc.cholesky.len() != m * m || doc.alpha.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "model cache: {} factor entries and {} weights for 2S = {m}",
                doc.cholesky.len(),
                doc.alpha.len()
            )));
        }
        let mut factor = Factor::from_lower(Mat::from_fn(m, m, |i, j| doc.cholesky[i * m + j]));
        factor.jitter = doc.jitter;
        Ok(GpModel {
            gp: FeatureGp { map, factor, alpha: doc.alpha, normalization: doc.normalization },
            optimizer: doc.opt,
            losses: doc.losses,
        })
    }
}

/// Maximizes the feature-space likelihood over the log hyperparameters,
/// starting from those in `map`, and conditions on `data`.
pub fn ff_fit(map: &FeatureMap, data: &Dataset, cfg: &AdamConfig) -> Result<GpModel> {
    check_data(map, data)?;
    let trace = adam_minimize(
        |p| {
            let m = map.with_hyper(Hyperparams::from_log(p))?;
            let (l, g) = ff_loglik_grad(&m, data)?;
            Ok((-l, g.iter().map(|v| -v).collect()))
        },
        &map.spec.hyper.to_log(),
        cfg,
    )?;
    let fitted = map.with_hyper(Hyperparams::from_log(&trace.x))?;
    Ok(GpModel { gp: FeatureGp::condition(fitted, data)?, optimizer: *cfg, losses: trace.losses })
}

/// Predictions of a fitted model in normalized target units.
pub fn ff_predict(model: &GpModel, xs: MatRef<'_, f64>) -> Result<PredictiveDistribution> {
    model.predict(xs)
}
