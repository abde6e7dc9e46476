//! Reference integration and brute-force certificate checks.
//!
//! Everything here is deliberately independent of the rule-construction
//! path: values come from adaptive Gauss-Kronrod integration of the raw
//! integrand, never from recurrence coefficients or eigenvectors.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::oprec::{QuadratureRule1D, RuleKind, TensorRule};
use crate::spectral::{Density1D, KernelSpec};

/// Default absolute tolerance for oracle integrals.
pub const ORACLE_TOL: f64 = 1e-13;

/// Default cap on the number of panels in one adaptive integration.
pub const MAX_SUBDIVISIONS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    if !fc.is_finite() {
        return Err(Error::NonFinite(centre));
    }
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (centre - dx, centre + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(Error::NonFinite(x1));
        }
        if !f2.is_finite() {
            return Err(Error::NonFinite(x2));
        }
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    // Floor for the rounding error of the 15-term sum itself.
    let round_off = 4.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (4.0 * f64::EPSILON) {
        error = error.max(round_off);
    }
    Ok(Panel { a, b, value, error })
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<IntegralResult> {
    integrate_adaptive_hinted(f, a, b, tol, None)
}

/// Like [`integrate_adaptive`], but when `max_frequency` is given the
/// interval is pre-split into panels no wider than `pi / (4 * max_frequency)`.
pub fn integrate_adaptive_hinted<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_frequency: Option<f64>,
) -> Result<IntegralResult> {
    if !(tol > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!("integrate over [{a}, {b}] with tol {tol}")));
    }
    if a == b {
        return Ok(IntegralResult { value: 0.0, abs_error_estimate: 0.0, evaluations: 1 });
    }
    let width = b - a;
    let initial = match max_frequency {
        Some(freq) if freq > 0.0 => ((width.abs() * 4.0 * freq / PI).ceil() as usize).max(1),
        _ => 1,
    };
    let mut heap = BinaryHeap::with_capacity(initial * 2);
    let mut evaluations = 0usize;
    for i in 0..initial {
        let lo = a + width * (i as f64) / (initial as f64);
        let hi = if i + 1 == initial { b } else { a + width * ((i + 1) as f64) / (initial as f64) };
        heap.push(gk15(&f, lo, hi)?);
        evaluations += 15;
    }
    let mut subdivisions = initial;
    let mut total_error: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        if total_error <= tol {
            // the running sum drifts; confirm with a fresh one
            total_error = heap.iter().map(|p| p.error).sum();
            if total_error <= tol {
                break;
            }
        }
        if subdivisions >= MAX_SUBDIVISIONS {
            return Err(Error::MaxSubdivision(subdivisions));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Panel is at machine resolution; nothing more to gain.
            total_error -= worst.error;
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        let (left, right) = (gk15(&f, worst.a, mid)?, gk15(&f, mid, worst.b)?);
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        evaluations += 30;
        subdivisions += 1;
    }
    // Sum in a fixed order so results do not depend on heap layout.
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let abs_error_estimate = panels.iter().map(|p| p.error).sum();
    Ok(IntegralResult { value, abs_error_estimate, evaluations })
}

/// Integral of `f` over `[a, inf)` through the map `x = a + t / (1 - t)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<IntegralResult> {
    integrate_adaptive(
        |t: f64| {
            let s = 1.0 - t;
            let x = a + t / s;
            let v = f(x) / (s * s);
            // The mapped integrand may produce inf * 0 right at t -> 1.
            if v.is_nan() || x.is_infinite() {
                0.0
            } else {
                v
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Standard normal CDF accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(x)` without cancellation.
pub fn normal_upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `int_{-pi}^{pi} gamma p(gamma w) cos(freq w) dw` by adaptive integration
/// over `[0, pi]` (the integrand is even).
pub fn truncated_cosine_moment(density: Density1D, gamma: f64, freq: f64) -> Result<f64> {
    let hint = if freq.abs() > 1.0 { Some(freq.abs()) } else { None };
    let r = integrate_adaptive_hinted(
        |w| gamma * density.pdf(gamma * w) * (freq * w).cos(),
        0.0,
        PI,
        0.5 * ORACLE_TOL,
        hint,
    )?;
    Ok(2.0 * r.value)
}

/// Zeroth moment `int_{-pi}^{pi} gamma p(gamma w) dw`.
pub fn truncated_mass(density: Density1D, gamma: f64) -> Result<f64> {
    truncated_cosine_moment(density, gamma, 0.0)
}

/// The truncated Fourier integral that quadrature feature maps approximate:
/// `g * prod_j int_{-pi}^{pi} p_gamma(gamma w) cos(w gamma tau_j / theta_j) dw`.
pub fn truncated_fourier(spec: &KernelSpec, tau: &[f64]) -> Result<f64> {
    if tau.len() != spec.dim() {
        return Err(Error::DimensionMismatch(format!("tau has {} entries, kernel dim {}", tau.len(), spec.dim())));
    }
    let std = spec.standardized_density()?;
    let mut value = std.g;
    for (j, &t) in tau.iter().enumerate() {
        let freq = spec.gamma * t * std.d_diag[j];
        value *= truncated_cosine_moment(std.densities[j], spec.gamma, freq)?;
    }
    Ok(value)
}

/// Untruncated Fourier integral `g * prod_j int p(w) cos(w tau_j / theta_j) dw`,
/// evaluated on `[-R, R]` plus mapped semi-infinite tails.
pub fn untruncated_fourier(spec: &KernelSpec, tau: &[f64]) -> Result<f64> {
    let std = spec.standardized_density()?;
    let cut = 12.0;
    let mut value = std.g;
    for (j, &t) in tau.iter().enumerate() {
        let freq = t * std.d_diag[j];
        let density = std.densities[j];
        let hint = if freq.abs() > 1.0 { Some(freq.abs()) } else { None };
        let core = integrate_adaptive_hinted(|w| density.pdf(w) * (freq * w).cos(), 0.0, cut, 0.25 * ORACLE_TOL, hint)?;
        let tail = integrate_semi_infinite(|w| density.pdf(w) * (freq * w).cos(), cut, 0.25 * ORACLE_TOL)?;
        value *= 2.0 * (core.value + tail.value);
    }
    Ok(value)
}

/// One row of an exactness certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow {
    pub k: Vec<usize>,
    pub quad: f64,
    pub oracle: f64,
    pub abs_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub rows: Vec<CertificateRow>,
    pub exactness_degree: usize,
    /// True when every row with `max(k) <= exactness_degree` passes.
    pub pass: bool,
}

impl Certificate {
    /// Smallest frequency (by infinity norm) whose row fails, if any.
    pub fn first_failure(&self) -> Option<&CertificateRow> {
        self.rows.iter().filter(|r| !r.pass).min_by_key(|r| r.k.iter().copied().max().unwrap_or(0))
    }
}

/// Relative-or-absolute tolerance used by certificates.
pub const CERTIFICATE_TOL: f64 = 1e-9;

fn certify(k: Vec<usize>, quad: f64, oracle: f64) -> CertificateRow {
    let abs_err = (quad - oracle).abs();
    let pass = abs_err <= CERTIFICATE_TOL * oracle.abs().max(1.0);
    CertificateRow { k, quad, oracle, abs_err, pass }
}

fn moments(density: Density1D, gamma: f64, kmax: usize) -> Result<Vec<f64>> {
    (0..=kmax).map(|k| truncated_cosine_moment(density, gamma, k as f64)).collect()
}

/// Nodes of a 1-d rule as trigonometric frequencies in `[-pi, pi]` units.
///
/// Trig rules already live there. Hermite/Legendre rules built for the
/// standardized density are mapped back through `w = u / gamma`.
fn as_trig_nodes(rule: &QuadratureRule1D, gamma: f64) -> Vec<f64> {
    match rule.kind {
        RuleKind::Trig => rule.nodes.clone(),
        RuleKind::Hermite | RuleKind::Legendre => rule.nodes.iter().map(|u| u / gamma).collect(),
    }
}

/// Compare `Q(cos(k w))` against the oracle moment for every `k <= kmax`.
pub fn exactness_certificate(rule: &QuadratureRule1D, spec: &KernelSpec, kmax: usize) -> Result<Certificate> {
    let density = spec.standardized_density()?.densities[0];
    let nodes = as_trig_nodes(rule, spec.gamma);
    let m = moments(density, spec.gamma, kmax)?;
    let rows: Vec<CertificateRow> = (0..=kmax)
        .map(|k| {
            let quad: f64 = nodes.iter().zip(&rule.weights).map(|(w, a)| a * (k as f64 * w).cos()).sum();
            certify(vec![k], quad, m[k])
        })
        .collect();
    let degree = rule.exactness_degree;
    let pass = rows.iter().filter(|r| r.k[0] <= degree).all(|r| r.pass);
    Ok(Certificate { rows, exactness_degree: degree, pass })
}

/// Multi-index certificate for a tensor rule: every `k` in `{0..kmax}^d`.
pub fn tensor_exactness_certificate(rule: &TensorRule, spec: &KernelSpec, kmax: usize) -> Result<Certificate> {
    let density = spec.standardized_density()?.densities[0];
    let m = moments(density, spec.gamma, kmax)?;
    let d = rule.dim;
    let scale = match rule.kind {
        RuleKind::Trig => 1.0,
        RuleKind::Hermite | RuleKind::Legendre => 1.0 / spec.gamma,
    };
    let mut rows = Vec::new();
    let mut k = vec![0usize; d];
    loop {
        let oracle: f64 = k.iter().map(|&kj| m[kj]).product();
        let quad: f64 = rule
            .frequencies
            .chunks_exact(d)
            .zip(&rule.weights)
            .map(|(w, a)| {
                let dot: f64 = w.iter().zip(&k).map(|(wj, &kj)| scale * wj * kj as f64).sum();
                a * dot.cos()
            })
            .sum();
        rows.push(certify(k.clone(), quad, oracle));
        // odometer increment
        let mut j = d;
        loop {
            if j == 0 {
                let degree = rule.exactness_degree;
                let pass = rows.iter().filter(|r| r.k.iter().all(|&x| x <= degree)).all(|r| r.pass);
                return Ok(Certificate { rows, exactness_degree: degree, pass });
            }
            j -= 1;
            if k[j] < kmax {
                k[j] += 1;
                break;
            }
            k[j] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Hyperparams, KernelSpec};

    #[test]
    fn sine_over_half_period() {
        let r = integrate_adaptive(f64::sin, 0.0, PI, 1e-13).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!(r.abs_error_estimate >= 0.0 && r.evaluations > 0);
    }

    #[test]
    fn kronrod_integrates_degree_22_polynomials() {
        let r = gk15(&|x: f64| x.powi(22) + x.powi(7), -1.0, 1.0).unwrap();
        assert!((r.value - 2.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_gaussian_mass_matches_cdf() {
        let gamma = 1.15;
        let r = integrate_adaptive(|w| gamma * Density1D::StandardNormal.pdf(gamma * w), -PI, PI, 1e-14).unwrap();
        let expected = 2.0 * normal_cdf(gamma * PI) - 1.0;
        assert!((r.value - expected).abs() < 1e-12, "{} vs {}", r.value, expected);
    }

    #[test]
    fn oscillatory_integral_with_hint_stays_cheap() {
        let gamma = 1.15;
        let f = |w: f64| gamma * Density1D::StandardNormal.pdf(gamma * w) * (40.0 * w).cos();
        let r = integrate_adaptive_hinted(f, -PI, PI, 1e-13, Some(40.0)).unwrap();
        assert!(r.evaluations <= 100_000);
        let fine = integrate_adaptive_hinted(f, -PI, PI, 1e-14, Some(80.0)).unwrap();
        assert!((r.value - fine.value).abs() < 1e-12);
    }

    #[test]
    fn halving_tolerance_is_self_consistent() {
        let f = |w: f64| (-w * w).exp() * (13.0 * w).cos();
        let coarse = integrate_adaptive(f, 0.0, 3.0, 1e-10).unwrap();
        let fine = integrate_adaptive(f, 0.0, 3.0, 5e-11).unwrap();
        assert!((coarse.value - fine.value).abs() < 1e-10);
    }

    #[test]
    fn semi_infinite_gaussian_tail() {
        let r = integrate_semi_infinite(|w| Density1D::StandardNormal.pdf(w), 1.0, 1e-14).unwrap();
        assert!((r.value - normal_upper_tail(1.0)).abs() < 1e-13);
    }

    #[test]
    fn nonfinite_integrand_is_reported() {
        assert!(matches!(integrate_adaptive(|x| 1.0 / x, 0.0, 1.0, 1e-8), Err(Error::NonFinite(_))));
    }

    fn spec(dim: usize) -> KernelSpec {
        KernelSpec::se(Hyperparams::new(vec![0.3; dim], 1.7, 0.1).unwrap(), 1.15).unwrap()
    }

    #[test]
    fn truncated_fourier_at_zero_is_scaled_mass() {
        let s = spec(1);
        let mu0 = 2.0 * normal_cdf(1.15 * PI) - 1.0;
        assert!((truncated_fourier(&s, &[0.0]).unwrap() - 1.7 * mu0).abs() < 1e-12);
    }

    #[test]
    fn truncated_fourier_factorizes() {
        let s1 = spec(1);
        let s2 = spec(2);
        let a = truncated_fourier(&s1, &[0.21]).unwrap();
        let b = truncated_fourier(&s1, &[0.47]).unwrap();
        let ab = truncated_fourier(&s2, &[0.21, 0.47]).unwrap();
        assert!((ab - a * b / 1.7).abs() < 1e-12);
    }

    #[test]
    fn truncation_gap_is_bounded_by_tail() {
        let s = KernelSpec::se(Hyperparams::new(vec![0.05], 1.0, 0.1).unwrap(), 1.15).unwrap();
        let tail = s.truncation_tail();
        for i in 0..100 {
            let tau = 0.01 * i as f64 + 0.003;
            let gap = (truncated_fourier(&s, &[tau]).unwrap() - s.kernel_eval(&[tau])).abs();
            assert!(gap <= tail + 1e-13, "tau {tau}: gap {gap} > tail {tail}");
        }
    }
}
