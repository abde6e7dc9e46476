//! Datasets, normalization, synthetic generators and CSV ingestion.

use std::path::Path;

use faer::{Mat, MatRef, Side};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::kernel_matrix;
use crate::spectral::{Hyperparams, KernelSpec};

/// Largest `n` for which a GP draw is made by dense Cholesky.
pub const GP_SAMPLE_CAP: usize = 6000;

/// Affine map between stored (normalized) targets and raw targets:
/// `raw = mean + sd * stored`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub y_mean: f64,
    pub y_sd: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { y_mean: 0.0, y_sd: 1.0 }
    }
}

impl Normalization {
    /// Z-score constants of `y` (population standard deviation).
    pub fn fit(y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptyData);
        }
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        Ok(Normalization { y_mean: mean, y_sd: sd })
    }

    pub fn forward(&self, raw: f64) -> f64 {
        (raw - self.y_mean) / self.y_sd
    }

    pub fn inverse(&self, stored: f64) -> f64 {
        self.y_mean + self.y_sd * stored
    }
}

/// Inputs `x` (`n x d`) and stored targets `y`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Mat<f64>,
    pub y: Vec<f64>,
    pub normalization: Normalization,
}

impl Dataset {
    /// Wraps raw data without normalizing it.
    pub fn new(x: Mat<f64>, y: Vec<f64>) -> Result<Self> {
        let data = Dataset { x, y, normalization: Normalization::default() };
        data.validate()?;
        Ok(data)
    }

    /// Wraps raw data and z-scores the targets.
    pub fn normalized(x: Mat<f64>, raw_y: Vec<f64>) -> Result<Self> {
        let norm = Normalization::fit(&raw_y)?;
        let y = raw_y.iter().map(|v| norm.forward(*v)).collect();
        let data = Dataset { x, y, normalization: norm };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.is_empty() || self.x.nrows() == 0 {
            return Err(Error::EmptyData);
        }
        if self.x.nrows() != self.y.len() {
            return Err(Error::LengthMismatch(self.x.nrows(), self.y.len()));
        }
        if self.x.ncols() == 0 {
            return Err(Error::InvalidArgument("inputs have no columns".into()));
        }
        let finite_x = (0..self.x.ncols()).all(|j| self.x.col_as_slice(j).iter().all(|v| v.is_finite()));
        if !finite_x || !self.y.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite values in data".into()));
        }
        if !(self.normalization.y_sd > 0.0 && self.normalization.y_sd.is_finite()) {
            return Err(Error::InvalidArgument("normalization is not invertible".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|j| self.x[(i, j)]).collect()
    }

    pub fn raw_y(&self) -> Vec<f64> {
        self.y.iter().map(|v| self.normalization.inverse(*v)).collect()
    }

    /// Rows `idx` with targets renormalized under `norm`.
    pub fn select(&self, idx: &[usize], norm: Normalization) -> Dataset {
        let x = Mat::from_fn(idx.len(), self.dim(), |i, j| self.x[(idx[i], j)]);
        let y = idx.iter().map(|&i| norm.forward(self.normalization.inverse(self.y[i]))).collect();
        Dataset { x, y, normalization: norm }
    }

    /// Per-column `max - min` of the inputs.
    pub fn input_range(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                let col = self.x.col_as_slice(j);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .collect()
    }
}

/// Noiseless toy function `exp(-x^2) exp(sin^2(10 (x - 0.5))) + 3x`.
pub fn toy_function(x: f64) -> f64 {
    let s = (10.0 * (x - 0.5)).sin();
    (-x * x).exp() * (s * s).exp() + 3.0 * x
}

/// Toy regression data: `x ~ U(0, 1)`, `y = toy_function(x) + N(0, 0.1^2)`,
/// targets z-scored.
pub fn gen_toy(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let e: f64 = rng.sample(StandardNormal);
            toy_function(x) + 0.1 * e
        })
        .collect();
    Dataset::normalized(Mat::from_fn(n, 1, |i, _| xs[i]), y)
}

/// `m` equally spaced test inputs on `[-1, 1]`.
pub fn toy_test_grid(m: usize) -> Mat<f64> {
    let step = if m > 1 { 2.0 / (m - 1) as f64 } else { 0.0 };
    Mat::from_fn(m, 1, |i, _| -1.0 + step * i as f64)
}

/// Schaffer function N.2:
/// `0.5 + (sin^2(x^2 - y^2) - 0.5) / (1 + 0.001 (x^2 + y^2))^2`.
///
/// See <https://www.sfu.ca/~ssurjano/schaffer2.html>.
pub fn schaffer2(x: f64, y: f64) -> f64 {
    let s = (x * x - y * y).sin();
    let d = 1.0 + 0.001 * (x * x + y * y);
    0.5 + (s * s - 0.5) / (d * d)
}

/// `n` uniform points on `[-3, 3]^2` with Schaffer N.2 targets.
pub fn gen_schaffer(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
    let y = pts.iter().map(|p| schaffer2(p[0], p[1])).collect();
    Dataset::new(Mat::from_fn(n, 2, |i, j| pts[i][j]), y)
}

/// Scale and noise used by [`gen_gp2d`].
pub const GP2D_SCALE: f64 = 1.0;
pub const GP2D_NOISE: f64 = 0.01;

/// Draw from a 2-d isotropic SE GP prior (`nu = 1`, `sigma^2 = 0.01`) at
/// `n` uniform inputs on `[0, 1]^2`.
pub fn gen_gp2d(n: usize, theta: f64, seed: u64) -> Result<Dataset> {
    if n > GP_SAMPLE_CAP {
        return Err(Error::CapExceeded { n, cap: GP_SAMPLE_CAP });
    }
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let spec = KernelSpec::se(Hyperparams::new(vec![theta, theta], GP2D_SCALE, GP2D_NOISE)?, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Mat::from_fn(n, 2, |_, _| rng.random::<f64>());
    let y = sample_gp(&spec, x.as_ref(), &mut rng)?;
    Dataset::new(x, y)
}

/// One draw of `N(0, K_XX + sigma^2 I)`.
pub fn sample_gp<R: Rng + ?Sized>(spec: &KernelSpec, x: MatRef<'_, f64>, rng: &mut R) -> Result<Vec<f64>> {
    let n = x.nrows();
    let mut k = kernel_matrix(spec, x);
    for i in 0..n {
        k[(i, i)] += spec.hyper.noise;
    }
    let chol = k.llt(Side::Lower).map_err(|_| Error::CholeskyFailure { jitter: 0.0 })?;
    let z = Mat::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = chol.L() * z;
    Ok(y.col_as_slice(0).to_vec())
}

/// Reads a CSV with a header row, `d` input columns and a final target
/// column. Targets are z-scored.
pub fn ingest_csv<P: AsRef<Path>>(path: P) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let cols = headers.len();
    if cols < 2 {
        return Err(Error::Parse { line: 1, msg: format!("need at least 2 columns, found {cols}") });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line() as usize), msg: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols {
            return Err(Error::Parse { line, msg: format!("expected {cols} fields, found {}", rec.len()) });
        }
        let mut row = Vec::with_capacity(cols);
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse { line, msg: format!("not a number: '{field}'") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("non-finite value '{field}'") });
            }
            row.push(v);
        }
        ys.push(row.pop().expect("at least two columns"));
        xs.push(row);
    }
    if ys.is_empty() {
        return Err(Error::EmptyData);
    }
    let x = Mat::from_fn(ys.len(), cols - 1, |i, j| xs[i][j]);
    Dataset::normalized(x, ys)
}

/// Writes inputs and raw targets as CSV with columns `x1..xd,y`.
pub fn write_csv<W: std::io::Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(csv_io)?;
    for (i, y) in data.raw_y().iter().enumerate() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        rec.push(format!("{y:.17e}"));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Seeded shuffle split. The training targets are re-z-scored and the test
/// targets use the training constants.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} not in (0, 1)")));
    }
    let n = data.len();
    let n_train = ((n as f64) * fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!("split of {n} rows leaves an empty side")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (tr, te) = idx.split_at(n_train);
    let raw = data.raw_y();
    let norm = Normalization::fit(&tr.iter().map(|&i| raw[i]).collect::<Vec<_>>())?;
    Ok((data.select(tr, norm), data.select(te, norm)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_function_at_half() {
        assert!((toy_function(0.5) - ((-0.25f64).exp() + 1.5)).abs() < 1e-15);
    }

    #[test]
    fn toy_is_deterministic_and_noise_matches() {
        let a = gen_toy(5000, 3).unwrap();
        let b = gen_toy(5000, 3).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        let raw = a.raw_y();
        let resid: Vec<f64> = (0..a.len()).map(|i| raw[i] - toy_function(a.x[(i, 0)])).collect();
        let m = resid.iter().sum::<f64>() / resid.len() as f64;
        let v = resid.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (resid.len() - 1) as f64;
        assert!((v - 0.01).abs() < 0.001, "residual variance {v}");
        let mean = a.y.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn schaffer_values() {
        assert_eq!(schaffer2(0.0, 0.0), 0.0);
        let d = gen_schaffer(10, 4).unwrap();
        for i in 0..10 {
            let (x, y) = (d.x[(i, 0)], d.x[(i, 1)]);
            assert!((schaffer2(x, y) - schaffer2(y, x)).abs() < 1e-15);
            let oneliner = 0.5 + ((x * x - y * y).sin().powi(2) - 0.5) / (1.0 + 0.001 * (x * x + y * y)).powi(2);
            assert!((d.y[i] - oneliner).abs() < 1e-12);
            assert!((-3.0..3.0).contains(&x) && (-3.0..3.0).contains(&y));
        }
    }

    #[test]
    fn gp2d_moments_and_determinism() {
        let a = gen_gp2d(2000, 0.05, 11).unwrap();
        let b = gen_gp2d(2000, 0.05, 11).unwrap();
        assert_eq!(a.y, b.y);
        let n = a.len() as f64;
        let mean = a.y.iter().sum::<f64>() / n;
        let var = a.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.01).abs() < 0.15 * 1.01, "variance {var}");
        assert!(matches!(gen_gp2d(6001, 0.05, 1), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn gp2d_mean_over_seeds() {
        let mut total = 0.0;
        let mut count = 0.0;
        for seed in 0..20 {
            let d = gen_gp2d(200, 0.05, seed).unwrap();
            total += d.y.iter().sum::<f64>();
            count += d.len() as f64;
        }
        // sd of the grand mean is at most sqrt(1.01 / 20) even under full correlation
        assert!((total / count).abs() <= 3.0 * (1.01f64 / 20.0).sqrt());
    }

    #[test]
    fn split_is_disjoint_complete_and_seeded() {
        let x = Mat::from_fn(10, 1, |i, _| i as f64);
        let d = Dataset::normalized(x, (0..10).map(|i| (i * i) as f64).collect()).unwrap();
        let (tr, te) = split(&d, 0.8, 5).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let mut seen: Vec<f64> = (0..8).map(|i| tr.x[(i, 0)]).chain((0..2).map(|i| te.x[(i, 0)])).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        let (tr2, _) = split(&d, 0.8, 5).unwrap();
        assert_eq!(tr.y, tr2.y);
        let mean = tr.y.iter().sum::<f64>() / 8.0;
        let sd = (tr.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0).sqrt();
        assert!(mean.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
        for i in 0..2 {
            let raw = te.normalization.inverse(te.y[i]);
            assert!((raw - te.x[(i, 0)].powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "x,y\n1,2\n3,oops\n";
        match read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_csv("x,y\n".as_bytes()), Err(Error::EmptyData)));
    }

    #[test]
    fn csv_round_trip() {
        let d = gen_schaffer(25, 9).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.x, d.x);
        let raw = back.raw_y();
        for (a, b) in raw.iter().zip(d.raw_y()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
