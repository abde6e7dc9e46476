//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use faer::Mat;
use serde_json::json;

use tqff_core::data::{gen_gp2d, gen_schaffer, gen_toy, ingest_csv, write_csv};
use tqff_core::featmap::{approx_error_sweep, build_feature_map, quadrature_rule, Method};
use tqff_core::gp::{ff_fit, initial_hyper, AdamConfig, GpModel};
use tqff_core::oprec::RuleDocument;
use tqff_core::oracle::{exactness_certificate, tensor_exactness_certificate};
use tqff_core::{Hyperparams, KernelFamily, KernelSpec};

use crate::error::{config, CliError, Result};
use crate::experiment::{run_experiment, size_for, ExperimentConfig};
use crate::report::{provenance_line, sha256_hex, write_atomic, Table};

#[derive(Debug, Parser)]
#[command(name = "tqff", version, about = "Quadrature Fourier features for Gaussian processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a quadrature rule and write it as JSON.
    Rule(RuleArgs),
    /// Check a rule's exactness against independent integrals.
    Verify(VerifyArgs),
    /// Kernel approximation error over a lag grid.
    Sweep(SweepArgs),
    /// Fit a feature-space GP to a CSV dataset.
    Fit(FitArgs),
    /// Predict with a fitted model.
    Predict(PredictArgs),
    /// Generate a synthetic dataset.
    Datagen(DatagenArgs),
    /// Run an experiment suite from a JSON configuration.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct RuleArgs {
    #[arg(long, default_value = "se")]
    pub kernel: String,
    #[arg(long, default_value = "tqff")]
    pub method: Method,
    #[arg(long = "L")]
    pub l: usize,
    #[arg(long, default_value_t = 1.15)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub rule: PathBuf,
    #[arg(long, default_value = "se")]
    pub kernel: String,
    /// Defaults to the gamma stored in the rule.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Defaults to the rule's exactness degree.
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "tqff,glff,ghff,rff")]
    pub methods: Vec<Method>,
    /// One length-scale per input dimension.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub lengthscale: Vec<f64>,
    /// Target frequency counts.
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub tau_grid_n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 1.15)]
    pub gamma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "tqff")]
    pub method: Method,
    /// Target frequency count S.
    #[arg(long)]
    pub features: usize,
    #[arg(long, default_value_t = 1.15)]
    pub gamma: f64,
    #[arg(long, default_value_t = 300)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with a header and `d` input columns, optionally followed by a target column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Which {
    Toy,
    Schaffer,
    Gp2d,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[arg(long, value_enum)]
    pub which: Which,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Length-scale of the gp2d draw.
    #[arg(long, default_value_t = 0.05)]
    pub theta: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Sizes the global rayon pool from `TQFF_THREADS`, if set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("TQFF_THREADS") else { return Ok(()) };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return config(format!("TQFF_THREADS must be a positive integer, got '{v}'")),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Rule(a) => rule(&a),
        Command::Verify(a) => verify(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Fit(a) => fit(&a),
        Command::Predict(a) => predict(&a),
        Command::Datagen(a) => datagen(&a),
        Command::Bench(a) => bench(&a),
    }
}

fn unit_spec(kernel: &str, dim: usize, gamma: f64) -> Result<KernelSpec> {
    let family: KernelFamily = kernel.parse().map_err(|e: tqff_core::Error| CliError::Config(e.to_string()))?;
    if dim == 0 {
        return config("dim must be at least 1");
    }
    Ok(KernelSpec::new(family, Hyperparams::new(vec![1.0; dim], 1.0, 1.0)?, gamma)?)
}

fn write_table(path: &Path, table: &Table, params: &serde_json::Value, seeds: &[u64]) -> Result<()> {
    let hash = sha256_hex(params.to_string().as_bytes());
    write_atomic(path, table.to_csv(&provenance_line(&hash, seeds))?.as_bytes())
}

fn rule(a: &RuleArgs) -> Result<()> {
    if a.method == Method::Rff {
        return config("rff has no quadrature rule");
    }
    let spec = unit_spec(&a.kernel, a.dim, a.gamma)?;
    let rule = quadrature_rule(a.method, &spec, a.l)?;
    let gamma = (a.method == Method::Tqff).then_some(a.gamma);
    write_atomic(&a.out, rule.to_document(gamma).to_json().as_bytes())
}

fn verify(a: &VerifyArgs) -> Result<()> {
    let doc = RuleDocument::from_json(&std::fs::read_to_string(&a.rule)?)?;
    let gamma = match (a.gamma, doc.gamma) {
        (Some(g), _) | (None, Some(g)) => g,
        (None, None) => return config("rule has no gamma; pass --gamma"),
    };
    let spec = unit_spec(&a.kernel, doc.dim, gamma)?;
    let kmax = a.max_degree.unwrap_or(doc.exactness_degree);
    let cert = if doc.dim == 1 {
        exactness_certificate(&doc.to_rule_1d()?, &spec, kmax)?
    } else {
        tensor_exactness_certificate(&doc.to_tensor_rule(), &spec, kmax)?
    };
    let mut table = Table::new(&["k", "quad", "oracle", "abs_err", "pass"]);
    for r in &cert.rows {
        let k: Vec<String> = r.k.iter().map(usize::to_string).collect();
        table.push(vec![
            k.join(","),
            format!("{}", r.quad),
            format!("{}", r.oracle),
            format!("{}", r.abs_err),
            r.pass.to_string(),
        ]);
    }
    let params = json!({"command": "verify", "rule": doc.to_json(), "gamma": gamma, "max_degree": kmax});
    write_table(&a.out, &table, &params, &[])?;
    if !cert.pass {
        let worst = cert.first_failure().map(|r| format!("{:?}", r.k)).unwrap_or_default();
        return Err(CliError::Certificate(worst));
    }
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    if a.s_grid.is_empty() || a.s_grid.contains(&0) {
        return config("--s-grid needs positive frequency counts");
    }
    if a.tau_grid_n < 2 {
        return config("--tau-grid-n must be at least 2");
    }
    let d = a.lengthscale.len();
    let spec = KernelSpec::se(Hyperparams::new(a.lengthscale.clone(), 1.0, 0.01)?, a.gamma)?;
    let taus: Vec<Vec<f64>> =
        (0..a.tau_grid_n).map(|i| vec![i as f64 / (a.tau_grid_n - 1) as f64; d]).collect();
    let mut table = Table::new(&["method", "S", "tau", "abs_error"]);
    for &m in &a.methods {
        let sizes: Vec<usize> = a.s_grid.iter().map(|&s| size_for(m, s, d)).collect();
        for row in approx_error_sweep(&[m], &spec, &sizes, &taus, &a.seeds)? {
            for (t, e) in taus.iter().zip(&row.errors) {
                table.push(vec![m.to_string(), row.s.to_string(), format!("{}", t[0]), format!("{e}")]);
            }
        }
    }
    let params = json!({
        "command": "sweep", "methods": a.methods, "lengthscale": a.lengthscale, "s_grid": a.s_grid,
        "tau_grid_n": a.tau_grid_n, "gamma": a.gamma,
    });
    write_table(&a.out, &table, &params, &a.seeds)
}

fn fit(a: &FitArgs) -> Result<()> {
    if a.features == 0 {
        return config("--features must be positive");
    }
    let data = ingest_csv(&a.data)?;
    let init = KernelSpec::se(initial_hyper(&data)?, a.gamma)?;
    let size = size_for(a.method, a.features, data.dim());
    let map = build_feature_map(a.method, &init, size, Some(a.seed))?;
    let opt = AdamConfig { lr: a.lr, iters: a.iters, seed: a.seed, ..AdamConfig::default() };
    let model = ff_fit(&map, &data, &opt)?;
    write_atomic(&a.out, model.to_json().as_bytes())
}

/// Reads the input columns of a CSV; a trailing target column is ignored.
fn read_inputs(path: &Path, d: usize) -> Result<Mat<f64>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let cols = rdr.headers()?.len();
    if cols != d && cols != d + 1 {
        return config(format!("{} has {cols} columns; the model expects {d} inputs", path.display()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().take(d).map(str::parse::<f64>).collect();
        match row {
            Ok(r) if r.iter().all(|v| v.is_finite()) => rows.push(r),
            _ => return config(format!("non-numeric input on record {}", rows.len() + 1)),
        }
    }
    Ok(Mat::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

fn predict(a: &PredictArgs) -> Result<()> {
    let model = GpModel::from_json(&std::fs::read_to_string(&a.model)?)?;
    let xs = read_inputs(&a.data, model.gp.map.dim())?;
    let pred = model.gp.predict_raw(xs.as_ref())?;
    let mut table = Table::new(&["index", "mean", "sd_obs", "sd_latent"]);
    for (i, ((m, so), sl)) in pred.means.iter().zip(pred.sd_obs()).zip(pred.sd_latent()).enumerate() {
        table.push(vec![i.to_string(), format!("{m}"), format!("{so}"), format!("{sl}")]);
    }
    let params = json!({"command": "predict", "model": sha256_hex(model.to_json().as_bytes())});
    let seeds: Vec<u64> = model.gp.map.seed.into_iter().collect();
    write_table(&a.out, &table, &params, &seeds)
}

fn datagen(a: &DatagenArgs) -> Result<()> {
    if a.n == 0 {
        return config("--n must be positive");
    }
    let data = match a.which {
        Which::Toy => gen_toy(a.n, a.seed)?,
        Which::Schaffer => gen_schaffer(a.n, a.seed)?,
        Which::Gp2d => gen_gp2d(a.n, a.theta, a.seed)?,
    };
    let params = json!({"command": "datagen", "which": format!("{:?}", a.which), "n": a.n, "theta": a.theta});
    let mut bytes = provenance_line(&sha256_hex(params.to_string().as_bytes()), &[a.seed]).into_bytes();
    write_csv(&data, &mut bytes)?;
    write_atomic(&a.out, &bytes)
}

fn bench(a: &BenchArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&a.config)?)?;
    if let Some(out) = &a.out {
        cfg.output_dir = out.clone();
    }
    match run_experiment(&cfg) {
        Ok(mut bundle) => {
            bundle.write_to(&cfg.output_dir, cfg.plots)?;
            Ok(())
        }
        Err(failure) => {
            let mut partial = failure.partial;
            partial.write_to(&cfg.output_dir, cfg.plots)?;
            Err(failure.error)
        }
    }
}
