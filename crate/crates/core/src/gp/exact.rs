//! Exact GP regression by dense Cholesky.

use faer::{Mat, MatRef};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_minimize, AdamConfig};
use super::{dot, Factor, PredictiveDistribution, LN_2PI};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::spectral::{Hyperparams, KernelFamily, KernelSpec};

/// Largest training set the exact GP accepts.
pub const FULL_GP_CAP: usize = 6000;

/// `K_XX` without noise.
pub fn kernel_matrix(spec: &KernelSpec, x: MatRef<'_, f64>) -> Mat<f64> {
    let n = x.nrows();
    let mut k = Mat::<f64>::zeros(n, n);
    let mut tau = vec![0.0; x.ncols()];
    for j in 0..n {
        k[(j, j)] = spec.kernel_eval(&vec![0.0; x.ncols()]);
        for i in j + 1..n {
            for (c, t) in tau.iter_mut().enumerate() {
                *t = x[(i, c)] - x[(j, c)];
            }
            let v = spec.kernel_eval(&tau);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `K_{X X*}`, `n x m`.
pub fn cross_kernel(spec: &KernelSpec, x: MatRef<'_, f64>, xs: MatRef<'_, f64>) -> Mat<f64> {
    let mut tau = vec![0.0; x.ncols()];
    Mat::from_fn(x.nrows(), xs.nrows(), |i, j| {
        for (c, t) in tau.iter_mut().enumerate() {
            *t = x[(i, c)] - xs[(j, c)];
        }
        spec.kernel_eval(&tau)
    })
}

fn noisy(k: &Mat<f64>, noise: f64) -> Mat<f64> {
    let mut c = k.clone();
    for i in 0..c.nrows() {
        c[(i, i)] += noise;
    }
    c
}

/// `log N(y; 0, K + noise I)` for a given noiseless covariance `k`.
/// `jitter_scale` sets the size of any diagonal jitter (see [`Factor::new`]).
pub fn dense_gp_loglik(k: &Mat<f64>, noise: f64, y: &[f64], jitter_scale: f64) -> Result<f64> {
    if k.nrows() != y.len() {
        return Err(Error::LengthMismatch(k.nrows(), y.len()));
    }
    let f = Factor::new(&noisy(k, noise), jitter_scale)?;
    let alpha = f.solve_vec(y);
    Ok(-0.5 * (dot(y, &alpha) + f.logdet() + y.len() as f64 * LN_2PI))
}

/// Conditional Gaussian predictions from a noiseless training covariance
/// `k`, training-test covariance `k_cross` (`n x m`) and prior test
/// variances `k_diag`.
pub fn dense_gp_predict(
    k: &Mat<f64>,
    k_cross: &Mat<f64>,
    k_diag: &[f64],
    noise: f64,
    y: &[f64],
    jitter_scale: f64,
) -> Result<PredictiveDistribution> {
    if k.nrows() != y.len() || k_cross.nrows() != y.len() {
        return Err(Error::LengthMismatch(k.nrows(), y.len()));
    }
    if k_cross.ncols() != k_diag.len() {
        return Err(Error::LengthMismatch(k_cross.ncols(), k_diag.len()));
    }
    let f = Factor::new(&noisy(k, noise), jitter_scale)?;
    let alpha = f.solve_vec(y);
    let mut v = k_cross.clone();
    f.half_solve_in_place(v.as_mut());
    let m = k_diag.len();
    let mut means = Vec::with_capacity(m);
    let mut latent = Vec::with_capacity(m);
    for j in 0..m {
        means.push(dot(k_cross.col_as_slice(j), &alpha));
        let col = v.col_as_slice(j);
        latent.push((k_diag[j] - dot(col, col)).max(0.0));
    }
    let variances = latent.iter().map(|v| v + noise).collect();
    Ok(PredictiveDistribution { means, variances, latent_variances: latent })
}

fn check_cap(n: usize) -> Result<()> {
    if n > FULL_GP_CAP {
        return Err(Error::CapExceeded { n, cap: FULL_GP_CAP });
    }
    Ok(())
}

pub fn full_gp_loglik(spec: &KernelSpec, data: &Dataset) -> Result<f64> {
    check_cap(data.len())?;
    let k = kernel_matrix(spec, data.x.as_ref());
    dense_gp_loglik(&k, spec.hyper.noise, &data.y, spec.hyper.scale)
}

pub fn full_gp_predict(spec: &KernelSpec, data: &Dataset, xs: MatRef<'_, f64>) -> Result<PredictiveDistribution> {
    check_cap(data.len())?;
    let k = kernel_matrix(spec, data.x.as_ref());
    let kc = cross_kernel(spec, data.x.as_ref(), xs);
    let diag = vec![spec.kernel_eval(&vec![0.0; spec.dim()]); xs.nrows()];
    dense_gp_predict(&k, &kc, &diag, spec.hyper.noise, &data.y, spec.hyper.scale)
}

/// Exact log-likelihood and its gradient in `(log theta_1.., log nu, log sigma^2)`.
pub fn full_gp_loglik_grad(spec: &KernelSpec, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    check_cap(data.len())?;
    let KernelFamily::Se = spec.family;
    let n = data.len();
    let d = spec.dim();
    let k = kernel_matrix(spec, data.x.as_ref());
    let noise = spec.hyper.noise;
    let f = Factor::new(&noisy(&k, noise), spec.hyper.scale)?;
    let alpha = f.solve_vec(&data.y);
    let loglik = -0.5 * (dot(&data.y, &alpha) + f.logdet() + n as f64 * LN_2PI);
    let inv = f.inverse();
    // dL/dpsi = 1/2 sum_{ik} (alpha alpha^T - C^{-1})_{ik} dC_{ik}
    let mut grad = vec![0.0; d + 2];
    let theta = &spec.hyper.lengthscales;
    for j in 0..n {
        for i in 0..n {
            let p = alpha[i] * alpha[j] - inv[(i, j)];
            let kij = k[(i, j)];
            for c in 0..d {
                let t = (data.x[(i, c)] - data.x[(j, c)]) / theta[c];
                grad[c] += 0.5 * p * kij * t * t;
            }
            grad[d] += 0.5 * p * kij;
        }
        grad[d + 1] += 0.5 * noise * (alpha[j] * alpha[j] - inv[(j, j)]);
    }
    Ok((loglik, grad))
}

/// Starting point: `theta_j = range_j / 2`, `nu = var(y)`, `sigma^2 = var(y) / 10`.
pub fn initial_hyper(data: &Dataset) -> Result<Hyperparams> {
    let n = data.len() as f64;
    let mean = data.y.iter().sum::<f64>() / n;
    let var = (data.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).max(1e-12);
    let theta = data.input_range().iter().map(|r| if *r > 0.0 { 0.5 * r } else { 1.0 }).collect();
    Hyperparams::new(theta, var, 0.1 * var)
}

/// Maximizes the exact log-likelihood with Adam, starting from `init`.
///
/// With `subsample = Some((m, seed))`, the likelihood is evaluated on a
/// fixed random subset of `m` points, which keeps the O(n^3) cost per step
/// manageable for larger `n`.
pub fn full_gp_fit(
    init: &KernelSpec,
    data: &Dataset,
    cfg: &AdamConfig,
    subsample: Option<(usize, u64)>,
) -> Result<KernelSpec> {
    let sub;
    let train = match subsample {
        Some((m, seed)) if m < data.len() => {
            let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), data.len(), m).into_vec();
            idx.sort_unstable();
            sub = data.select(&idx, data.normalization);
            &sub
        }
        _ => data,
    };
    check_cap(train.len())?;
    let trace = adam_minimize(
        |p| {
            let spec = init.with_hyper(Hyperparams::from_log(p))?;
            let (l, g) = full_gp_loglik_grad(&spec, train)?;
            Ok((-l, g.iter().map(|v| -v).collect()))
        },
        &init.hyper.to_log(),
        cfg,
    )?;
    init.with_hyper(Hyperparams::from_log(&trace.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Mat::from_fn(n, d, |_, _| rng.random::<f64>());
        let y = (0..n).map(|i| (6.0 * x[(i, 0)]).sin() + 0.3 * rng.random::<f64>()).collect();
        Dataset::new(x, y).unwrap()
    }

    fn se(theta: Vec<f64>, nu: f64, noise: f64) -> KernelSpec {
        KernelSpec::se(Hyperparams::new(theta, nu, noise).unwrap(), 1.15).unwrap()
    }

    #[test]
    fn single_zero_observation() {
        let data = Dataset::new(Mat::from_fn(1, 1, |_, _| 0.4), vec![0.0]).unwrap();
        let spec = se(vec![0.3], 1.7, 0.2);
        let l = full_gp_loglik(&spec, &data).unwrap();
        assert!((l + 0.5 * (2.0 * std::f64::consts::PI * 1.9).ln()).abs() < 1e-14);
    }

    #[test]
    fn loglik_matches_explicit_inverse_and_determinant() {
        let data = random_data(20, 2, 1);
        let spec = se(vec![0.3, 0.5], 1.3, 0.05);
        let mut c = kernel_matrix(&spec, data.x.as_ref());
        for i in 0..20 {
            c[(i, i)] += 0.05;
        }
        let inv = Factor::exact(&c).unwrap().inverse();
        let det = c.determinant();
        let y = Mat::from_fn(20, 1, |i, _| data.y[i]);
        let quad = (y.transpose() * &inv * &y)[(0, 0)];
        let naive = -0.5 * (quad + det.ln() + 20.0 * LN_2PI);
        assert!((full_gp_loglik(&spec, &data).unwrap() - naive).abs() < 1e-8);
    }

    #[test]
    fn interpolates_as_noise_vanishes() {
        let x = Mat::from_fn(8, 1, |i, _| i as f64 / 7.0);
        let data = Dataset::new(x, vec![0.3, -1.0, 0.5, 0.9, 0.0, -0.2, 1.4, 0.7]).unwrap();
        let spec = se(vec![0.1], 1.0, 1e-10);
        let pred = full_gp_predict(&spec, &data, data.x.as_ref()).unwrap();
        for i in 0..8 {
            assert!((pred.means[i] - data.y[i]).abs() < 1e-6);
            assert!(pred.latent_variances[i] < 1e-8);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let data = random_data(30, 2, 3);
        let spec = se(vec![0.4, 0.25], 0.8, 0.1);
        let (_, g) = full_gp_loglik_grad(&spec, &data).unwrap();
        let p0 = spec.hyper.to_log();
        let h = 1e-5;
        for k in 0..p0.len() {
            let mut p = p0.clone();
            p[k] += h;
            let up = full_gp_loglik(&spec.with_hyper(Hyperparams::from_log(&p)).unwrap(), &data).unwrap();
            p[k] -= 2.0 * h;
            let dn = full_gp_loglik(&spec.with_hyper(Hyperparams::from_log(&p)).unwrap(), &data).unwrap();
            let fd = (up - dn) / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "param {k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn fit_improves_likelihood() {
        let data = random_data(60, 1, 4);
        let init = se(initial_hyper(&data).unwrap().lengthscales, 1.0, 0.1);
        let cfg = AdamConfig { lr: 0.05, iters: 100, ..AdamConfig::default() };
        let fitted = full_gp_fit(&init, &data, &cfg, None).unwrap();
        assert!(full_gp_loglik(&fitted, &data).unwrap() > full_gp_loglik(&init, &data).unwrap());
    }

    #[test]
    fn cap_is_enforced() {
        let data = Dataset::new(Mat::zeros(FULL_GP_CAP + 1, 1), vec![0.0; FULL_GP_CAP + 1]).unwrap();
        assert!(matches!(full_gp_loglik(&se(vec![1.0], 1.0, 1.0), &data), Err(Error::CapExceeded { .. })));
    }
}
