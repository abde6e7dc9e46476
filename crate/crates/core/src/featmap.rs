//! Fourier feature maps.
//!
//! A map holds `S` standardized frequencies and weight factors and produces
//! `Phi(x)` in `R^{2S}` (cosine block, then sine block) with
//! `Phi(x)^T Phi(x') ~ k(x - x')`. Frequencies never depend on the kernel
//! hyperparameters; length-scales and the amplitude enter at evaluation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::oprec::{
    gauss_hermite_rule, gauss_legendre_rule, halve_symmetric, raw_float, raw_floats, tensor_product, trig_rule,
    QuadratureRule1D, TensorRule,
};
use crate::spectral::{Density1D, Hyperparams, KernelFamily, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tqff,
    Glff,
    Ghff,
    Rff,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tqff, Method::Glff, Method::Ghff, Method::Rff];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tqff => "tqff",
            Method::Glff => "glff",
            Method::Ghff => "ghff",
            Method::Rff => "rff",
        }
    }

    pub fn is_random(self) -> bool {
        self == Method::Rff
    }

    /// Number of frequencies produced for a `size` parameter in `dim`
    /// dimensions. Quadrature maps take the per-dimension node count and
    /// give `(2L)^d / 2`; RFF takes `S` directly.
    pub fn frequency_count(self, size: usize, dim: usize) -> usize {
        match self {
            Method::Rff => size,
            _ => size * (2 * size).pow(dim as u32 - 1),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tqff" => Ok(Method::Tqff),
            "glff" => Ok(Method::Glff),
            "ghff" => Ok(Method::Ghff),
            "rff" => Ok(Method::Rff),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub method: Method,
    /// `S x dim`, row-major.
    pub frequencies: Vec<f64>,
    /// `sqrt(a_s)`, without the kernel amplitude.
    pub sqrt_weights: Vec<f64>,
    pub spec: KernelSpec,
    pub seed: Option<u64>,
    /// The `size` the map was built with (L, or S for RFF).
    pub size: usize,
}

/// The 1-d rule behind a quadrature map, already reduced to positive nodes
/// in standardized-frequency or angle units.
fn base_rule(method: Method, spec: &KernelSpec, l: usize) -> Result<QuadratureRule1D> {
    let density = match spec.family {
        KernelFamily::Se => Density1D::StandardNormal,
    };
    match method {
        Method::Tqff => trig_rule(density, spec.gamma, l),
        Method::Glff => {
            // 2L-point rule on the same window as the trig rule, times the density
            let b = spec.gamma * PI;
            let mut rule = gauss_legendre_rule(2 * l, -b, b)?;
            for (w, u) in rule.weights.iter_mut().zip(&rule.nodes) {
                *w *= density.pdf(*u);
            }
            rule.mu0 = rule.weights.iter().sum();
            halve_symmetric(&rule)
        }
        Method::Ghff => {
            if spec.family != KernelFamily::Se {
                return Err(Error::UnsupportedFamily(format!("{:?}", spec.family)));
            }
            // int phi(u) f(u) du = pi^{-1/2} int exp(-t^2) f(sqrt(2) t) dt
            let mut rule = gauss_hermite_rule(2 * l)?;
            for x in rule.nodes.iter_mut() {
                *x *= std::f64::consts::SQRT_2;
            }
            for w in rule.weights.iter_mut() {
                *w /= PI.sqrt();
            }
            rule.mu0 = 1.0;
            halve_symmetric(&rule)
        }
        Method::Rff => Err(Error::InvalidArgument("RFF has no quadrature rule".into())),
    }
}

/// The `d`-dimensional half-space rule behind a quadrature map with `l`
/// positive nodes per dimension.
pub fn quadrature_rule(method: Method, spec: &KernelSpec, l: usize) -> Result<TensorRule> {
    spec.validate()?;
    if l == 0 {
        return Err(Error::InvalidL(0));
    }
    let rule = base_rule(method, spec, l)?;
    tensor_product(&vec![rule; spec.dim()])
}

/// Builds a feature map. `size` is the per-dimension node count for
/// quadrature methods and the frequency count for RFF.
pub fn build_feature_map(method: Method, spec: &KernelSpec, size: usize, seed: Option<u64>) -> Result<FeatureMap> {
    spec.validate()?;
    if size == 0 {
        return Err(Error::InvalidL(0));
    }
    let d = spec.dim();
    let (frequencies, weights, seed) = match method {
        Method::Rff => {
            let seed = seed.ok_or(Error::SeedRequired)?;
            let density = spec.standardized_density()?.densities;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut freqs = Vec::with_capacity(size * d);
            for _ in 0..size {
                for p in &density {
                    freqs.push(p.sample(&mut rng));
                }
            }
            (freqs, vec![1.0 / size as f64; size], Some(seed))
        }
        _ => {
            let tensor = quadrature_rule(method, spec, size)?;
            (tensor.frequencies, tensor.weights, None)
        }
    };
    Ok(FeatureMap {
        method,
        frequencies,
        sqrt_weights: weights.iter().map(|a| a.max(0.0).sqrt()).collect(),
        spec: spec.clone(),
        seed,
        size,
    })
}

impl FeatureMap {
    /// Frequency count `S`.
    pub fn len(&self) -> usize {
        self.sqrt_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sqrt_weights.is_empty()
    }

    /// Feature dimension `2S`.
    pub fn feature_len(&self) -> usize {
        2 * self.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Per-dimension factor turning `x_j` into the cosine argument:
    /// `gamma / theta_j` for the trig rule, `1 / theta_j` otherwise.
    pub fn input_scale(&self) -> Vec<f64> {
        let c = if self.method == Method::Tqff { self.spec.gamma } else { 1.0 };
        self.spec.hyper.lengthscales.iter().map(|t| c / t).collect()
    }

    /// Quadrature weights `a_s`.
    pub fn weights(&self) -> Vec<f64> {
        self.sqrt_weights.iter().map(|s| s * s).collect()
    }

    /// `g * sum(a_s)`: the approximate prior variance.
    pub fn prior_variance(&self) -> f64 {
        self.spec.amplitude() * self.sqrt_weights.iter().map(|s| s * s).sum::<f64>()
    }

    /// Same frequencies, new hyperparameters.
    pub fn with_hyper(&self, hyper: Hyperparams) -> Result<FeatureMap> {
        Ok(FeatureMap { spec: self.spec.with_hyper(hyper)?, ..self.clone() })
    }

    fn arguments(&self, x: &[f64], scale: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (arg, w) in out.iter_mut().zip(self.frequencies.chunks_exact(d)) {
            *arg = w.iter().zip(x).zip(scale).map(|((w, x), c)| w * c * x).sum();
        }
    }

    pub fn feature_vector(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "input dimension");
        let s = self.len();
        let amp = self.spec.amplitude().sqrt();
        let mut out = vec![0.0; 2 * s];
        let scale = self.input_scale();
        let (cos, sin) = out.split_at_mut(s);
        self.arguments(x, &scale, cos);
        for i in 0..s {
            let (sn, cs) = cos[i].sin_cos();
            let r = amp * self.sqrt_weights[i];
            cos[i] = r * cs;
            sin[i] = r * sn;
        }
        out
    }

    /// `Lambda`, the `2S x n` matrix whose columns are `Phi(x_i)` for the
    /// rows of `x` (`n x d`).
    pub fn design_matrix(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(x.ncols(), self.dim(), "input dimension");
        let n = x.nrows();
        let s = self.len();
        let d = self.dim();
        let amp = self.spec.amplitude().sqrt();
        let scale = self.input_scale();
        let r: Vec<f64> = self.sqrt_weights.iter().map(|w| amp * w).collect();
        let mut out = Mat::<f64>::zeros(2 * s, n);
        let mut xi = vec![0.0; d];
        for i in 0..n {
            for (j, v) in xi.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            let col = out.col_as_slice_mut(i);
            let (cos, sin) = col.split_at_mut(s);
            self.arguments(&xi, &scale, cos);
            for k in 0..s {
                let (sn, cs) = cos[k].sin_cos();
                cos[k] = r[k] * cs;
                sin[k] = r[k] * sn;
            }
        }
        out
    }

    /// `Phi(0)^T Phi(tau) = g * sum_s a_s cos(arg_s(tau))`.
    pub fn approx_kernel(&self, tau: &[f64]) -> f64 {
        assert_eq!(tau.len(), self.dim(), "input dimension");
        let scale = self.input_scale();
        let mut args = vec![0.0; self.len()];
        self.arguments(tau, &scale, &mut args);
        let sum: f64 = args.iter().zip(&self.sqrt_weights).map(|(t, s)| s * s * t.cos()).sum();
        self.spec.amplitude() * sum
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            method: Method,
            #[serde(rename = "S")]
            s: usize,
            size: usize,
            dim: usize,
            gamma: Box<RawValue>,
            #[serde(skip_serializing_if = "Option::is_none")]
            seed: Option<u64>,
            kernel: &'a KernelSpec,
            frequencies: Box<RawValue>,
            sqrt_weights: Box<RawValue>,
        }
        let out = Out {
            method: self.method,
            s: self.len(),
            size: self.size,
            dim: self.dim(),
            gamma: raw_float(self.spec.gamma),
            seed: self.seed,
            kernel: &self.spec,
            frequencies: raw_floats(&self.frequencies),
            sqrt_weights: raw_floats(&self.sqrt_weights),
        };
        serde_json::to_string_pretty(&out).expect("feature map serializes")
    }

    pub fn document(&self) -> MapDocument {
        MapDocument {
            method: self.method,
            s: self.len(),
            size: self.size,
            dim: self.dim(),
            gamma: self.spec.gamma,
            seed: self.seed,
            kernel: self.spec.clone(),
            frequencies: self.frequencies.clone(),
            sqrt_weights: self.sqrt_weights.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<FeatureMap> {
        let doc: MapDocument = serde_json::from_str(text)?;
        doc.into_map()
    }
}

/// JSON form of a feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub method: Method,
    #[serde(rename = "S")]
    pub s: usize,
    pub size: usize,
    pub dim: usize,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub kernel: KernelSpec,
    pub frequencies: Vec<f64>,
    pub sqrt_weights: Vec<f64>,
}

impl MapDocument {
    pub fn into_map(self) -> Result<FeatureMap> {
        self.kernel.validate()?;
        if self.kernel.dim() != self.dim || self.frequencies.len() != self.s * self.dim || self.sqrt_weights.len() != self.s
        {
            return Err(Error::DimensionMismatch(format!(
                "map with S = {}, dim = {}: {} frequency entries, {} weights",
                self.s,
                self.dim,
                self.frequencies.len(),
                self.sqrt_weights.len()
            )));
        }
        Ok(FeatureMap {
            method: self.method,
            frequencies: self.frequencies,
            sqrt_weights: self.sqrt_weights,
            spec: self.kernel,
            seed: self.seed,
            size: self.size,
        })
    }
}

/// Absolute kernel errors for one `(method, size)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub method: Method,
    pub size: usize,
    /// Frequency count `S`.
    pub s: usize,
    /// `|k(tau) - Phi(0)^T Phi(tau)|` per grid point; seed-averaged for RFF.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

/// Kernel approximation errors of every method at every size over a grid
/// of lags `taus` (each of length `spec.dim()`).
pub fn approx_error_sweep(
    methods: &[Method],
    spec: &KernelSpec,
    sizes: &[usize],
    taus: &[Vec<f64>],
    seeds: &[u64],
) -> Result<Vec<ErrorRow>> {
    if methods.is_empty() || sizes.is_empty() || taus.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    let exact: Vec<f64> = taus.iter().map(|t| spec.kernel_eval(t)).collect();
    let mut rows = Vec::with_capacity(methods.len() * sizes.len());
    for &method in methods {
        for &size in sizes {
            let errors = if method.is_random() {
                if seeds.is_empty() {
                    return Err(Error::SeedRequired);
                }
                let mut acc = vec![0.0; taus.len()];
                for &seed in seeds {
                    let map = build_feature_map(method, spec, size, Some(seed))?;
                    for (a, (t, k)) in acc.iter_mut().zip(taus.iter().zip(&exact)) {
                        *a += (k - map.approx_kernel(t)).abs();
                    }
                }
                acc.iter().map(|a| a / seeds.len() as f64).collect::<Vec<f64>>()
            } else {
                let map = build_feature_map(method, spec, size, None)?;
                taus.iter().zip(&exact).map(|(t, k)| (k - map.approx_kernel(t)).abs()).collect()
            };
            let mean = errors.iter().sum::<f64>() / errors.len() as f64;
            let max = errors.iter().copied().fold(0.0, f64::max);
            rows.push(ErrorRow { method, size, s: method.frequency_count(size, spec.dim()), errors, mean, max });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{truncated_fourier, truncated_mass};
    use proptest::prelude::*;

    fn spec(theta: &[f64], nu: f64) -> KernelSpec {
        KernelSpec::se(Hyperparams::new(theta.to_vec(), nu, 0.01).unwrap(), 1.15).unwrap()
    }

    #[test]
    fn tqff_2d_count() {
        let m = build_feature_map(Method::Tqff, &spec(&[0.3, 0.4], 1.0), 5, None).unwrap();
        assert_eq!(m.len(), 50);
        assert_eq!(m.feature_len(), 100);
        assert_eq!(m.feature_vector(&[0.1, 0.2]).len(), 100);
    }

    #[test]
    fn quadrature_counts_in_two_dimensions() {
        let s = spec(&[0.3, 0.4], 1.0);
        for method in [Method::Glff, Method::Ghff] {
            let m = build_feature_map(method, &s, 8, None).unwrap();
            assert_eq!(m.len(), 128);
            assert_eq!(m.len(), method.frequency_count(8, 2));
        }
    }

    #[test]
    fn rff_is_seeded() {
        let s = spec(&[0.3], 1.0);
        let a = build_feature_map(Method::Rff, &s, 300, Some(7)).unwrap();
        let b = build_feature_map(Method::Rff, &s, 300, Some(7)).unwrap();
        assert_eq!(a, b);
        let c = build_feature_map(Method::Rff, &s, 300, Some(8)).unwrap();
        assert_ne!(a.frequencies, c.frequencies);
        assert!(matches!(build_feature_map(Method::Rff, &s, 300, None), Err(Error::SeedRequired)));
    }

    #[test]
    fn tqff_exact_on_integer_lattice() {
        let theta = 0.05;
        let s = spec(&[theta], 1.0);
        let m = build_feature_map(Method::Tqff, &s, 40, None).unwrap();
        for k in 0..=79 {
            let tau = k as f64 * theta / s.gamma;
            let oracle = truncated_fourier(&s, &[tau]).unwrap();
            assert!((m.approx_kernel(&[tau]) - oracle).abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn feature_vector_at_origin_and_norm() {
        let s = spec(&[0.2], 2.5);
        for method in Method::ALL {
            let m = build_feature_map(method, &s, 12, Some(1)).unwrap();
            let phi0 = m.feature_vector(&[0.0]);
            let n = m.len();
            for i in 0..n {
                assert!((phi0[i] - (2.5 * m.sqrt_weights[i].powi(2)).sqrt()).abs() < 1e-15);
                assert_eq!(phi0[n + i], 0.0);
            }
            let phi = m.feature_vector(&[0.37]);
            let norm: f64 = phi.iter().map(|v| v * v).sum();
            assert!((norm - m.prior_variance()).abs() < 1e-13);
        }
    }

    #[test]
    fn inner_product_is_quadrature_sum() {
        let s = spec(&[0.2], 1.7);
        let m = build_feature_map(Method::Tqff, &s, 15, None).unwrap();
        let rule = trig_rule(Density1D::StandardNormal, s.gamma, 15).unwrap();
        let (x, y) = (0.31, -0.12);
        let dot: f64 = m.feature_vector(&[x]).iter().zip(m.feature_vector(&[y])).map(|(a, b)| a * b).sum();
        let tau = x - y;
        let quad = 1.7 * rule.integrate(|w| (w * s.gamma * tau / 0.2).cos());
        assert!((dot - quad).abs() < 1e-13);
    }

    #[test]
    fn design_matrix_columns_and_gram() {
        let s = spec(&[0.25], 1.0);
        let m = build_feature_map(Method::Glff, &s, 10, None).unwrap();
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 50.0).collect();
        let x = Mat::from_fn(50, 1, |i, _| xs[i]);
        let lam = m.design_matrix(x.as_ref());
        let one = m.design_matrix(x.as_ref().subrows(3, 1));
        let phi = m.feature_vector(&[xs[3]]);
        for i in 0..m.feature_len() {
            assert_eq!(one[(i, 0)], phi[i]);
            assert_eq!(lam[(i, 3)], phi[i]);
        }
        let gram = lam.transpose() * &lam;
        let eig = gram.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(eig[0] >= -1e-10);
    }

    #[test]
    fn tau_zero_error_is_truncation_deficit() {
        let s = spec(&[0.1], 1.0);
        let m = build_feature_map(Method::Tqff, &s, 20, None).unwrap();
        let mu0 = truncated_mass(Density1D::StandardNormal, s.gamma).unwrap();
        let err = (s.kernel_eval(&[0.0]) - m.approx_kernel(&[0.0])).abs();
        assert!((err - (1.0 - mu0)).abs() < 1e-12);
    }

    #[test]
    fn halved_glff_matches_full_rule() {
        let s = spec(&[0.3], 1.0);
        let m = build_feature_map(Method::Glff, &s, 9, None).unwrap();
        let b = s.gamma * PI;
        let full = gauss_legendre_rule(18, -b, b).unwrap();
        for i in 0..40 {
            let tau = i as f64 / 40.0;
            let direct = full.integrate(|u| Density1D::StandardNormal.pdf(u) * (u * tau / 0.3).cos());
            assert!((m.approx_kernel(&[tau]) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn frequencies_do_not_depend_on_hyperparameters() {
        for method in [Method::Tqff, Method::Glff, Method::Ghff] {
            let a = build_feature_map(method, &spec(&[0.3, 0.1], 1.0), 4, None).unwrap();
            let b = build_feature_map(method, &spec(&[0.02, 5.0], 7.0), 4, None).unwrap();
            assert_eq!(a.frequencies, b.frequencies);
            assert_eq!(a.sqrt_weights, b.sqrt_weights);
        }
    }

    #[test]
    fn ghff_is_worse_than_tqff_at_small_lengthscale() {
        let s = spec(&[0.01], 1.0);
        let taus: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 199.0]).collect();
        let rows = approx_error_sweep(&[Method::Tqff, Method::Ghff], &s, &[30], &taus, &[]).unwrap();
        assert!(rows[1].mean > rows[0].mean, "{} vs {}", rows[1].mean, rows[0].mean);
    }

    #[test]
    fn map_json_round_trip() {
        let s = spec(&[0.3, 0.2], 1.3);
        let m = build_feature_map(Method::Rff, &s, 17, Some(99)).unwrap();
        let back = FeatureMap::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let m = build_feature_map(Method::Tqff, &s, 3, None).unwrap();
        assert_eq!(FeatureMap::from_json(&m.to_json()).unwrap(), m);
    }

    fn maps() -> Vec<FeatureMap> {
        let s = spec(&[0.15, 0.4], 1.2);
        Method::ALL.iter().map(|&m| build_feature_map(m, &s, 6, Some(3)).unwrap()).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn shift_invariant_and_symmetric(
            x in proptest::array::uniform2(-2.0f64..2.0),
            y in proptest::array::uniform2(-2.0f64..2.0),
            delta in proptest::array::uniform2(-2.0f64..2.0),
        ) {
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
            for m in maps() {
                let (px, py) = (m.feature_vector(&x), m.feature_vector(&y));
                let xs = [x[0] + delta[0], x[1] + delta[1]];
                let ys = [y[0] + delta[0], y[1] + delta[1]];
                let shifted = dot(&m.feature_vector(&xs), &m.feature_vector(&ys));
                prop_assert!((dot(&px, &py) - shifted).abs() <= 1e-12);
                prop_assert!((dot(&px, &py) - dot(&py, &px)).abs() <= 1e-14);
                let tau = [x[0] - y[0], x[1] - y[1]];
                prop_assert!((dot(&px, &py) - m.approx_kernel(&tau)).abs() <= 1e-12);
            }
        }
    }
}
