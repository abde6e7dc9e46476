//! Experiment suites driven by a JSON configuration.

use std::path::PathBuf;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tqff_core::data::{gen_gp2d, gen_schaffer, gen_toy, ingest_csv, split, toy_test_grid, GP2D_NOISE, GP2D_SCALE};
use tqff_core::featmap::{approx_error_sweep, build_feature_map, ErrorRow, Method};
use tqff_core::gp::{
    ff_fit, full_gp_fit, full_gp_predict, initial_hyper, kl_gaussian, metrics, AdamConfig, FeatureGp,
    PredictiveDistribution, FULL_GP_CAP,
};
use tqff_core::{Dataset, Hyperparams, KernelSpec};

use crate::error::{config, CliError, Result};
use crate::report::{Figure, ReportBundle, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    ToyExample,
    KernelSweep,
    GammaSweep,
    Synthetic2D,
    HoldoutUncertainty,
    Benchmark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Toy { n: usize },
    Schaffer { n: usize },
    Gp2d { n_train: usize, n_test: usize, theta: f64 },
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub methods: Vec<Method>,
    /// Target frequency counts `S`. Quadrature maps use the node count whose
    /// `(2L)^d / 2` is closest. ToyExample pairs sizes with methods when the
    /// lists have equal length.
    pub sizes: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// KernelSweep: the length-scales swept. GammaSweep: the first is used.
    #[serde(default)]
    pub lengthscales: Vec<f64>,
    /// GammaSweep only.
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub data: Option<DataSource>,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default = "default_tau_grid_n")]
    pub tau_grid_n: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub plots: bool,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_gamma() -> f64 {
    1.15
}
fn default_tau_grid_n() -> usize {
    100
}
fn default_train_fraction() -> f64 {
    0.8
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("report")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical JSON with every default filled in; this is what gets hashed.
    /// The output location is left out so a replay elsewhere hashes the same.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output_dir = default_output_dir();
        serde_json::to_string_pretty(&c).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.sizes.is_empty() {
            return config("methods and sizes must be nonempty");
        }
        if self.sizes.contains(&0) {
            return config("sizes must be positive");
        }
        if self.seeds.is_empty() {
            return config("seeds must be nonempty");
        }
        let positive = |name: &str, xs: &[f64]| {
            if xs.iter().all(|x| x.is_finite() && *x > 0.0) {
                Ok(())
            } else {
                config(format!("{name} must be positive and finite"))
            }
        };
        positive("gamma", &[self.gamma])?;
        positive("lengthscales", &self.lengthscales)?;
        positive("gammas", &self.gammas)?;
        if self.tau_grid_n < 2 {
            return config("tau_grid_n must be at least 2");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return config("train_fraction must lie in (0, 1)");
        }
        if !(self.optimizer.lr > 0.0) {
            return config("optimizer.lr must be positive");
        }
        match &self.data {
            Some(DataSource::Csv { path }) if !path.exists() => {
                return config(format!("data file {} does not exist", path.display()));
            }
            Some(DataSource::Gp2d { theta, .. }) if !(*theta > 0.0) => return config("gp2d theta must be positive"),
            Some(DataSource::Toy { n } | DataSource::Schaffer { n }) if *n == 0 => return config("data n must be positive"),
            _ => {}
        }
        let data_ok = match (self.experiment, &self.data) {
            (_, None) => true,
            (ExperimentKind::KernelSweep | ExperimentKind::GammaSweep, Some(_)) => false,
            (ExperimentKind::Synthetic2D, Some(d)) => matches!(d, DataSource::Gp2d { .. }),
            (ExperimentKind::ToyExample | ExperimentKind::HoldoutUncertainty, Some(d)) => {
                matches!(d, DataSource::Toy { .. } | DataSource::Csv { .. })
            }
            (ExperimentKind::Benchmark, Some(_)) => true,
        };
        if !data_ok {
            return config(format!("data source {:?} does not apply to {:?}", self.data, self.experiment));
        }
        Ok(())
    }
}

/// A run that stopped early; `partial` holds every table completed so far.
#[derive(Debug)]
pub struct RunFailure {
    pub partial: ReportBundle,
    pub error: CliError,
}

/// Runs the configured suite.
pub fn run_experiment(cfg: &ExperimentConfig) -> std::result::Result<ReportBundle, Box<RunFailure>> {
    let mut bundle = ReportBundle::new(&format!("{:?}", cfg.experiment), cfg.canonical_json(), cfg.seeds.clone());
    let outcome = cfg.validate().and_then(|_| match cfg.experiment {
        ExperimentKind::KernelSweep => kernel_sweep(cfg, &mut bundle),
        ExperimentKind::GammaSweep => gamma_sweep(cfg, &mut bundle),
        ExperimentKind::ToyExample => toy_example(cfg, &mut bundle),
        ExperimentKind::Synthetic2D => synthetic_2d(cfg, &mut bundle),
        ExperimentKind::HoldoutUncertainty => holdout_uncertainty(cfg, &mut bundle),
        ExperimentKind::Benchmark => benchmark(cfg, &mut bundle),
    });
    match outcome {
        Ok(()) => {
            bundle.manifest.status = "ok".into();
            Ok(bundle)
        }
        Err(error) => {
            bundle.manifest.status = "failed".into();
            bundle.manifest.error = Some(error.to_string());
            Err(Box::new(RunFailure { partial: bundle, error }))
        }
    }
}

/// Size parameter of `method` whose frequency count is closest to `s`.
pub fn size_for(method: Method, s: usize, dim: usize) -> usize {
    if method == Method::Rff || dim == 1 {
        return s;
    }
    let mut best = 1;
    let mut p = 1;
    loop {
        let c = method.frequency_count(p, dim);
        if c.abs_diff(s) < method.frequency_count(best, dim).abs_diff(s) {
            best = p;
        }
        if c >= s {
            return best;
        }
        p += 1;
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn se(lengthscales: Vec<f64>, scale: f64, noise: f64, gamma: f64) -> Result<KernelSpec> {
    Ok(KernelSpec::se(Hyperparams::new(lengthscales, scale, noise)?, gamma)?)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Collects parallel results, keeping everything before the first error.
fn first_error<T>(results: Vec<Result<T>>) -> (Vec<T>, Option<CliError>) {
    let mut ok = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => return (ok, Some(e)),
        }
    }
    (ok, None)
}

fn error_figure(title: String, rows: &[&ErrorRow], methods: &[Method]) -> Figure {
    Figure {
        title,
        x_label: "S".into(),
        y_label: "mean |k - k~|".into(),
        log_x: true,
        log_y: true,
        series: methods
            .iter()
            .map(|m| Series {
                name: m.to_string(),
                points: rows.iter().filter(|r| r.method == *m).map(|r| (r.s as f64, r.mean)).collect(),
            })
            .collect(),
    }
}

fn kernel_sweep(cfg: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let thetas = if cfg.lengthscales.is_empty() { vec![0.05, 0.025, 0.01] } else { cfg.lengthscales.clone() };
    let taus: Vec<Vec<f64>> = linspace(0.0, 1.0, cfg.tau_grid_n).into_iter().map(|t| vec![t]).collect();
    let results: Vec<Result<Vec<ErrorRow>>> = thetas
        .par_iter()
        .map(|&theta| {
            let spec = se(vec![theta], 1.0, 0.01, cfg.gamma)?;
            Ok(approx_error_sweep(&cfg.methods, &spec, &cfg.sizes, &taus, &cfg.seeds)?)
        })
        .collect();
    let (done, err) = first_error(results);
    for (theta, rows) in thetas.iter().zip(&done) {
        let table = bundle.table_mut("kernel_sweep", &["theta", "method", "size", "S", "mean_error", "max_error"]);
        for r in rows {
            table.push(vec![num(*theta), r.method.to_string(), r.size.to_string(), r.s.to_string(), num(r.mean), num(r.max)]);
        }
        let refs: Vec<&ErrorRow> = rows.iter().collect();
        bundle
            .figures
            .insert(format!("kernel_sweep_theta_{theta}"), error_figure(format!("theta = {theta}"), &refs, &cfg.methods));
    }
    err.map_or(Ok(()), Err)
}

fn gamma_sweep(cfg: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let gammas = if cfg.gammas.is_empty() { vec![0.5, 0.8, 1.0, 1.15, 1.5] } else { cfg.gammas.clone() };
    let theta = cfg.lengthscales.first().copied().unwrap_or(0.1);
    let taus: Vec<Vec<f64>> = linspace(0.0, 1.0, cfg.tau_grid_n).into_iter().map(|t| vec![t]).collect();
    let results: Vec<Result<(f64, Vec<ErrorRow>)>> = gammas
        .par_iter()
        .map(|&gamma| {
            let spec = se(vec![theta], 1.0, 0.01, gamma)?;
            Ok((spec.truncation_tail(), approx_error_sweep(&cfg.methods, &spec, &cfg.sizes, &taus, &cfg.seeds)?))
        })
        .collect();
    let (done, err) = first_error(results);
    let mut series = Vec::new();
    for (gamma, (tail, rows)) in gammas.iter().zip(&done) {
        let table = bundle.table_mut(
            "gamma_sweep",
            &["gamma", "theta", "method", "L", "S", "max_error", "mean_error", "truncation_tail"],
        );
        for r in rows {
            table.push(vec![
                num(*gamma),
                num(theta),
                r.method.to_string(),
                r.size.to_string(),
                r.s.to_string(),
                num(r.max),
                num(r.mean),
                num(*tail),
            ]);
        }
        for m in &cfg.methods {
            series.push(Series {
                name: format!("{m} gamma={gamma}"),
                points: rows.iter().filter(|r| r.method == *m).map(|r| (r.size as f64, r.max)).collect(),
            });
        }
    }
    bundle.figures.insert(
        "gamma_sweep".into(),
        Figure {
            title: format!("max kernel error, theta = {theta}"),
            x_label: "L".into(),
            y_label: "max |k - k~|".into(),
            log_x: false,
            log_y: true,
            series,
        },
    );
    err.map_or(Ok(()), Err)
}

/// 1-d data for the toy and hold-out suites, plus a prediction grid.
fn one_d_data(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, Mat<f64>)> {
    match &cfg.data {
        None | Some(DataSource::Toy { .. }) => {
            let n = match cfg.data {
                Some(DataSource::Toy { n }) => n,
                _ => 2000,
            };
            Ok((gen_toy(n, seed)?, toy_test_grid(1000)))
        }
        Some(DataSource::Csv { path }) => {
            let data = ingest_csv(path)?;
            if data.dim() != 1 {
                return config(format!("{} has {} input columns; this suite needs 1", path.display(), data.dim()));
            }
            let (lo, hi) = (0..data.len()).map(|i| data.x[(i, 0)]).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            let pad = 0.5 * (hi - lo);
            let grid = linspace(lo - pad, hi + pad, 1000);
            Ok((data, Mat::from_fn(1000, 1, |i, _| grid[i])))
        }
        Some(other) => config(format!("data source {other:?} is not 1-d")),
    }
}

/// Full-GP hyperparameters, fitted on at most 500 points.
fn full_gp_hyper(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<KernelSpec> {
    if data.len() > FULL_GP_CAP {
        return Err(tqff_core::Error::CapExceeded { n: data.len(), cap: FULL_GP_CAP }.into());
    }
    let init = KernelSpec::se(initial_hyper(data)?, cfg.gamma)?;
    Ok(full_gp_fit(&init, data, &cfg.optimizer, Some((500, seed)))?)
}

fn toy_example(cfg: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let seed = cfg.seeds[0];
    let (data, grid) = one_d_data(cfg, seed)?;
    let spec = full_gp_hyper(cfg, &data, seed)?;
    bundle.table_mut("toy_hyperparameters", &["theta", "nu", "noise", "gamma"]).push(vec![
        num(spec.hyper.lengthscales[0]),
        num(spec.hyper.scale),
        num(spec.hyper.noise),
        num(spec.gamma),
    ]);
    let full = full_gp_predict(&spec, &data, grid.as_ref())?.denormalize(&data.normalization);
    let xs: Vec<f64> = (0..grid.nrows()).map(|i| grid[(i, 0)]).collect();
    let taus = linspace(-1.0, 1.0, cfg.tau_grid_n);

    let pairs: Vec<(Method, usize)> = if cfg.sizes.len() == cfg.methods.len() {
        cfg.methods.iter().copied().zip(cfg.sizes.iter().copied()).collect()
    } else {
        cfg.methods.iter().flat_map(|&m| cfg.sizes.iter().map(move |&s| (m, s))).collect()
    };
    let results: Vec<Result<(Method, usize, PredictiveDistribution, Vec<f64>)>> = pairs
        .par_iter()
        .map(|&(method, s)| {
            let map = build_feature_map(method, &spec, s, Some(seed))?;
            let k: Vec<f64> = taus.iter().map(|t| map.approx_kernel(&[*t])).collect();
            let pred = FeatureGp::condition(map, &data)?.predict_raw(grid.as_ref())?;
            Ok((method, s, pred, k))
        })
        .collect();
    let (done, err) = first_error(results);

    let header = ["method", "size", "S", "x", "mean", "sd_obs", "sd_latent"];
    let push_pred = |bundle: &mut ReportBundle, name: &str, size: &str, pred: &PredictiveDistribution| {
        let t = bundle.table_mut("toy_predictions", &header);
        let (so, sl) = (pred.sd_obs(), pred.sd_latent());
        for (j, x) in xs.iter().enumerate() {
            t.push(vec![name.into(), size.into(), size.into(), num(*x), num(pred.means[j]), num(so[j]), num(sl[j])]);
        }
    };
    push_pred(bundle, "full", "", &full);
    for (method, s, pred, _) in &done {
        push_pred(bundle, method.name(), &s.to_string(), pred);
    }
    let kt = bundle.table_mut("toy_kernel", &["method", "size", "tau", "k_exact", "k_approx"]);
    for (method, s, _, k) in &done {
        for (t, ka) in taus.iter().zip(k) {
            kt.push(vec![method.to_string(), s.to_string(), num(*t), num(spec.kernel_eval(&[*t])), num(*ka)]);
        }
    }

    let label = |m: &Method, s: &usize| format!("{m} S={s}");
    let mut means = vec![Series { name: "full".into(), points: xs.iter().copied().zip(full.means.iter().copied()).collect() }];
    let mut sds = vec![Series { name: "full".into(), points: xs.iter().copied().zip(full.sd_latent()).collect() }];
    let mut kern = vec![Series {
        name: "exact".into(),
        points: taus.iter().map(|t| (*t, spec.kernel_eval(&[*t]))).collect(),
    }];
    for (m, s, pred, k) in &done {
        means.push(Series { name: label(m, s), points: xs.iter().copied().zip(pred.means.iter().copied()).collect() });
        sds.push(Series { name: label(m, s), points: xs.iter().copied().zip(pred.sd_latent()).collect() });
        kern.push(Series { name: label(m, s), points: taus.iter().copied().zip(k.iter().copied()).collect() });
    }
    let fig = |title: &str, x: &str, y: &str, series| Figure {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log_x: false,
        log_y: false,
        series,
    };
    bundle.figures.insert("toy_mean".into(), fig("predictive mean", "x", "mean", means));
    bundle.figures.insert("toy_sd".into(), fig("latent sd", "x", "sd", sds));
    bundle.figures.insert("toy_kernel".into(), fig("kernel approximation", "tau", "k(tau)", kern));
    err.map_or(Ok(()), Err)
}

fn synthetic_2d(cfg: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let (n_train, n_test, theta) = match cfg.data {
        Some(DataSource::Gp2d { n_train, n_test, theta }) => (n_train, n_test, theta),
        _ => (4000, 1000, 0.05),
    };
    if n_train == 0 || n_test == 0 {
        return config("gp2d needs nonempty train and test sets");
    }
    let truth = se(vec![theta, theta], GP2D_SCALE, GP2D_NOISE, cfg.gamma)?;
    let header = ["seed", "method", "size", "S", "nll", "rmse"];
    bundle.table_mut("synthetic2d", &header);
    for &seed in &cfg.seeds {
        let all = gen_gp2d(n_train + n_test, theta, seed)?;
        let idx: Vec<usize> = (0..all.len()).collect();
        let train = all.select(&idx[..n_train], all.normalization);
        let test = all.select(&idx[n_train..], all.normalization);
        let full = metrics(&full_gp_predict(&truth, &train, test.x.as_ref())?, &test.y)?;
        bundle.table_mut("synthetic2d", &header).push(vec![
            seed.to_string(),
            "full".into(),
            String::new(),
            String::new(),
            num(full.nll),
            num(full.rmse),
        ]);
        let init = KernelSpec::se(initial_hyper(&train)?, cfg.gamma)?;
        let cells: Vec<(Method, usize)> =
            cfg.methods.iter().flat_map(|&m| cfg.sizes.iter().map(move |&s| (m, size_for(m, s, 2)))).collect();
        let results: Vec<Result<Vec<String>>> = cells
            .par_iter()
            .map(|&(method, size)| {
                let map = build_feature_map(method, &init, size, Some(seed))?;
                let s = map.len();
                let model = ff_fit(&map, &train, &cfg.optimizer)?;
                let m = metrics(&model.predict(test.x.as_ref())?, &test.y)?;
                Ok(vec![seed.to_string(), method.to_string(), size.to_string(), s.to_string(), num(m.nll), num(m.rmse)])
            })
            .collect();
        let (done, err) = first_error(results);
        let t = bundle.table_mut("synthetic2d", &header);
        done.into_iter().for_each(|r| t.push(r));
        if let Some(e) = err {
            return Err(e);
        }
    }
    summarize(bundle, "synthetic2d", &["nll", "rmse"])?;
    bundle.figures.insert("synthetic2d_nll".into(), metric_figure(bundle, "synthetic2d_summary", "nll", false));
    Ok(())
}

/// Per-(method, S) mean and standard error over seeds of each named column.
fn summarize(bundle: &mut ReportBundle, table: &str, cols: &[&str]) -> Result<()> {
    let t = bundle.tables.get(table).cloned().ok_or_else(|| CliError::Config(format!("no table {table}")))?;
    let methods = t.column("method");
    let ss = t.column("S");
    let values: Vec<Vec<f64>> = cols.iter().map(|c| t.column_f64(c)).collect();
    let mut keys: Vec<(String, String)> = Vec::new();
    for (m, s) in methods.iter().zip(&ss) {
        let k = (m.to_string(), s.to_string());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut header = vec!["method".to_string(), "S".to_string(), "seeds".to_string()];
    for c in cols {
        header.push(format!("mean_{c}"));
        header.push(format!("se_{c}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for (m, s) in keys {
        let sel: Vec<usize> = (0..methods.len()).filter(|&i| methods[i] == m && ss[i] == s).collect();
        let mut row = vec![m, s, sel.len().to_string()];
        for v in &values {
            let (mean, se) = mean_se(&sel.iter().map(|&i| v[i]).collect::<Vec<_>>());
            row.push(num(mean));
            row.push(num(se));
        }
        rows.push(row);
    }
    let out = bundle.table_mut(&format!("{table}_summary"), &header_refs);
    rows.into_iter().for_each(|r| out.push(r));
    Ok(())
}

fn metric_figure(bundle: &ReportBundle, summary: &str, col: &str, log_y: bool) -> Figure {
    let t = &bundle.tables[summary];
    let methods = t.column("method");
    let s = t.column_f64("S");
    let v = t.column_f64(&format!("mean_{col}"));
    let mut names: Vec<&str> = Vec::new();
    for m in &methods {
        if !names.contains(m) && s[names.len().min(s.len() - 1)].is_finite() {
            names.push(m);
        }
    }
    let series = names
        .iter()
        .map(|name| Series {
            name: name.to_string(),
            points: (0..methods.len()).filter(|&i| methods[i] == *name && s[i].is_finite()).map(|i| (s[i], v[i])).collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    Figure { title: format!("{col} vs S"), x_label: "S".into(), y_label: col.into(), log_x: true, log_y, series }
}

/// Five disjoint contiguous runs (in input order) covering about 20% of the
/// points, one placed at random inside each fifth of the series.
pub fn holdout_segments(n: usize, seed: u64) -> Vec<usize> {
    let block = n / 5;
    let len = (n / 25).max(1).min(block.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(5 * len);
    for b in 0..5 {
        let lo = b * block;
        let slack = block.saturating_sub(len);
        let start = lo + if slack > 0 { rng.random_range(0..=slack) } else { 0 };
        out.extend(start..(start + len).min(n));
    }
    out
}

fn holdout_uncertainty(cfg: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let header = ["seed", "method", "size", "S", "mean_kl", "max_kl"];
    bundle.table_mut("holdout", &header);
    for &seed in &cfg.seeds {
        let (data, _) = one_d_data(cfg, seed)?;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.x[(a, 0)].total_cmp(&data.x[(b, 0)]));
        let held: Vec<usize> = holdout_segments(data.len(), seed).into_iter().map(|i| order[i]).collect();
        let mut is_held = vec![false; data.len()];
        held.iter().for_each(|&i| is_held[i] = true);
        let kept: Vec<usize> = (0..data.len()).filter(|&i| !is_held[i]).collect();
        let train = data.select(&kept, data.normalization);
        let test = data.select(&held, data.normalization);

        let spec = full_gp_hyper(cfg, &train, seed)?;
        let full = full_gp_predict(&spec, &train, test.x.as_ref())?;
        let results: Vec<Result<Vec<String>>> = cfg
            .methods
            .iter()
            .flat_map(|&m| cfg.sizes.iter().map(move |&s| (m, s)))
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(method, s)| {
                let map = build_feature_map(method, &spec, s, Some(seed))?;
                let pred = FeatureGp::condition(map, &train)?.predict(test.x.as_ref())?;
                let kl = kl_gaussian(&full, &pred)?;
                let mean = kl.iter().sum::<f64>() / kl.len() as f64;
                let max = kl.iter().copied().fold(0.0, f64::max);
                Ok(vec![seed.to_string(), method.to_string(), s.to_string(), s.to_string(), num(mean), num(max)])
            })
            .collect();
        let (done, err) = first_error(results);
        let t = bundle.table_mut("holdout", &header);
        done.into_iter().for_each(|r| t.push(r));
        if let Some(e) = err {
            return Err(e);
        }
    }
    summarize(bundle, "holdout", &["mean_kl", "max_kl"])?;
    bundle.figures.insert("holdout_kl".into(), metric_figure(bundle, "holdout_summary", "mean_kl", true));
    Ok(())
}

fn benchmark_data(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    Ok(match &cfg.data {
        None => gen_schaffer(2000, seed)?,
        Some(DataSource::Schaffer { n }) => gen_schaffer(*n, seed)?,
        Some(DataSource::Toy { n }) => gen_toy(*n, seed)?,
        Some(DataSource::Gp2d { n_train, n_test, theta }) => gen_gp2d(n_train + n_test, *theta, seed)?,
        Some(DataSource::Csv { path }) => ingest_csv(path)?,
    })
}

fn benchmark(cfg: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let header = ["seed", "method", "size", "S", "rmse", "nll"];
    bundle.table_mut("benchmark", &header);
    for &seed in &cfg.seeds {
        let data = benchmark_data(cfg, seed)?;
        let (train, test) = split(&data, cfg.train_fraction, seed)?;
        let init = KernelSpec::se(initial_hyper(&train)?, cfg.gamma)?;
        let d = train.dim();
        let cells: Vec<(Method, usize)> =
            cfg.methods.iter().flat_map(|&m| cfg.sizes.iter().map(move |&s| (m, size_for(m, s, d)))).collect();
        let results: Vec<Result<Vec<String>>> = cells
            .par_iter()
            .map(|&(method, size)| {
                let map = build_feature_map(method, &init, size, Some(seed))?;
                let s = map.len();
                let model = ff_fit(&map, &train, &cfg.optimizer)?;
                let m = metrics(&model.predict(test.x.as_ref())?, &test.y)?;
                Ok(vec![seed.to_string(), method.to_string(), size.to_string(), s.to_string(), num(m.rmse), num(m.nll)])
            })
            .collect();
        let (done, err) = first_error(results);
        let t = bundle.table_mut("benchmark", &header);
        done.into_iter().for_each(|r| t.push(r));
        if let Some(e) = err {
            return Err(e);
        }
    }
    summarize(bundle, "benchmark", &["rmse", "nll"])?;
    bundle.figures.insert("benchmark_rmse".into(), metric_figure(bundle, "benchmark_summary", "rmse", true));
    bundle.figures.insert("benchmark_nll".into(), metric_figure(bundle, "benchmark_summary", "nll", false));
    Ok(())
}
