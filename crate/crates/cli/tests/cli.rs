use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tqff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tqff")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

/// Data rows of a CSV, skipping the provenance line and the header.
fn rows(p: &str) -> Vec<Vec<String>> {
    let text = fs::read_to_string(p).unwrap();
    assert!(text.starts_with("# config_hash="), "missing provenance in {p}");
    text.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn rule_then_verify_passes() {
    let dir = TempDir::new().unwrap();
    let rule = path(&dir, "rule.json");
    let out = tqff(&["rule", "--method", "tqff", "--L", "12", "--gamma", "1.15", "--out", &rule]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rule).unwrap()).unwrap();
    assert_eq!(doc["L"], 12);
    assert_eq!(doc["weights"].as_array().unwrap().len(), 12);

    let cert = path(&dir, "cert.csv");
    let out = tqff(&["verify", "--rule", &rule, "--out", &cert]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&cert);
    assert_eq!(r.len(), 24);
    assert!(r.iter().all(|row| row[4] == "true"));
}

#[test]
fn verify_past_the_exactness_degree_exits_3() {
    let dir = TempDir::new().unwrap();
    let rule = path(&dir, "rule.json");
    assert_eq!(code(&tqff(&["rule", "--L", "3", "--out", &rule])), 0);
    // claim more exactness than the rule has
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rule).unwrap()).unwrap();
    doc["exactness_degree"] = serde_json::json!(20);
    fs::write(&rule, doc.to_string()).unwrap();
    let out = tqff(&["verify", "--rule", &rule, "--out", &path(&dir, "cert.csv")]);
    assert_eq!(code(&out), 3);
    assert!(Path::new(&path(&dir, "cert.csv")).exists());
}

#[test]
fn tensor_rule_has_half_the_grid() {
    let dir = TempDir::new().unwrap();
    let rule = path(&dir, "rule.json");
    assert_eq!(code(&tqff(&["rule", "--method", "glff", "--L", "3", "--dim", "2", "--out", &rule])), 0);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rule).unwrap()).unwrap();
    assert_eq!(doc["weights"].as_array().unwrap().len(), 18);
    assert_eq!(doc["nodes"].as_array().unwrap().len(), 36);
}

#[test]
fn sweep_writes_one_row_per_lag() {
    let dir = TempDir::new().unwrap();
    let out_csv = path(&dir, "sweep.csv");
    let out = tqff(&[
        "sweep", "--methods", "tqff,rff", "--lengthscale", "0.1", "--s-grid", "10,20", "--tau-grid-n", "15", "--seeds",
        "0,1", "--out", &out_csv,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&out_csv);
    assert_eq!(r.len(), 2 * 2 * 15);
    assert!(r.iter().all(|row| row[3].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn datagen_fit_predict_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = path(&dir, "toy.csv");
    assert_eq!(code(&tqff(&["datagen", "--which", "toy", "--n", "300", "--seed", "4", "--out", &data])), 0);
    let model = path(&dir, "model.json");
    let out = tqff(&["fit", "--data", &data, "--method", "tqff", "--features", "30", "--iters", "60", "--out", &model]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let preds = path(&dir, "pred.csv");
    let out = tqff(&["predict", "--model", &model, "--data", &data, "--out", &preds]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&preds);
    assert_eq!(r.len(), 300);
    for row in &r {
        let so: f64 = row[2].parse().unwrap();
        let sl: f64 = row[3].parse().unwrap();
        assert!(so >= sl && sl >= 0.0);
    }

    // inputs only
    let xs = path(&dir, "xs.csv");
    fs::write(&xs, "x\n-0.5\n0.25\n1.5\n").unwrap();
    let out = tqff(&["predict", "--model", &model, "--data", &xs, "--out", &preds]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rows(&preds).len(), 3);
}

#[test]
fn bad_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "nope.csv");
    assert_eq!(code(&tqff(&["fit", "--data", &missing, "--features", "10", "--out", &path(&dir, "m.json")])), 2);
    assert_eq!(code(&tqff(&["rule", "--L", "0", "--out", &path(&dir, "r.json")])), 2);
    assert_eq!(code(&tqff(&["rule", "--L", "4", "--kernel", "matern", "--out", &path(&dir, "r.json")])), 2);
    assert_eq!(code(&tqff(&["rule", "--method", "rff", "--L", "4", "--out", &path(&dir, "r.json")])), 2);

    let cfg = path(&dir, "cfg.json");
    fs::write(&cfg, r#"{"experiment": "KernelSweep", "methods": ["tqff"], "sizes": []}"#).unwrap();
    assert_eq!(code(&tqff(&["bench", "--config", &cfg])), 2);
    fs::write(&cfg, "not json").unwrap();
    assert_eq!(code(&tqff(&["bench", "--config", &cfg])), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_tqff"))
        .args(["rule", "--L", "4", "--out", &path(&dir, "r.json")])
        .env("TQFF_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

fn run_bench(dir: &TempDir, name: &str, config: &str) -> std::path::PathBuf {
    let cfg = path(dir, &format!("{name}.json"));
    fs::write(&cfg, config).unwrap();
    let out_dir = dir.path().join(name);
    let out = Command::new(env!("CARGO_BIN_EXE_tqff"))
        .args(["bench", "--config", &cfg, "--out", out_dir.to_str().unwrap()])
        .env("TQFF_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    out_dir
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn bench_replays_bit_identically() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"experiment": "KernelSweep", "methods": ["tqff", "glff", "rff"], "sizes": [5, 10],
                     "seeds": [0, 1], "lengthscales": [0.1, 0.05], "tau_grid_n": 25, "plots": true}"#;
    let a = run_bench(&dir, "a", config);
    let b = run_bench(&dir, "b", config);
    let ta = fs::read(a.join("kernel_sweep.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("kernel_sweep.csv")).unwrap());
    let m = manifest(&a);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seeds"], serde_json::json!([0, 1]));
    assert_eq!(m, manifest(&b));
    let hash = m["config_hash"].as_str().unwrap();
    assert!(String::from_utf8(ta).unwrap().starts_with(&format!("# config_hash={hash} seeds=0,1\n")));
    assert!(a.join("kernel_sweep_theta_0.1.svg").exists());
    assert!(a.join("config.json").exists());
}

#[test]
fn every_suite_runs_at_small_scale() {
    let dir = TempDir::new().unwrap();
    let opt = r#""optimizer": {"lr": 0.05, "iters": 20}"#;
    let cases = [
        ("gamma", format!(r#"{{"experiment": "GammaSweep", "methods": ["tqff"], "sizes": [10, 20], "gammas": [1.0, 1.5], "tau_grid_n": 20}}"#), "gamma_sweep"),
        ("toy", format!(r#"{{"experiment": "ToyExample", "methods": ["tqff", "rff"], "sizes": [20, 40], "seeds": [0], "data": {{"source": "toy", "n": 200}}, "tau_grid_n": 21, {opt}}}"#), "toy_predictions"),
        ("syn", format!(r#"{{"experiment": "Synthetic2D", "methods": ["tqff", "rff"], "sizes": [18], "seeds": [0, 1], "data": {{"source": "gp2d", "n_train": 200, "n_test": 50, "theta": 0.2}}, {opt}}}"#), "synthetic2d_summary"),
        ("hold", format!(r#"{{"experiment": "HoldoutUncertainty", "methods": ["tqff"], "sizes": [30], "seeds": [0], "data": {{"source": "toy", "n": 250}}, {opt}}}"#), "holdout_summary"),
        ("bench", format!(r#"{{"experiment": "Benchmark", "methods": ["glff", "rff"], "sizes": [18], "seeds": [0], "data": {{"source": "schaffer", "n": 200}}, {opt}}}"#), "benchmark_summary"),
    ];
    for (name, config, table) in cases {
        let out = run_bench(&dir, name, &config);
        assert_eq!(manifest(&out)["status"], "ok", "{name}");
        let r = rows(out.join(format!("{table}.csv")).to_str().unwrap());
        assert!(!r.is_empty(), "{name}");
    }
}

#[test]
fn failed_bench_leaves_a_failure_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "cfg.json");
    fs::write(
        &cfg,
        r#"{"experiment": "Synthetic2D", "methods": ["tqff"], "sizes": [8], "seeds": [0],
            "data": {"source": "gp2d", "n_train": 6000, "n_test": 100, "theta": 0.1}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = tqff(&["bench", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let m = manifest(&out_dir);
    assert_eq!(m["status"], "failed");
    assert!(m["error"].as_str().unwrap().contains("cap"));
}
