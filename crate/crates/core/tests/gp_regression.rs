use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tqff_core::data::{gen_toy, sample_gp, split, toy_test_grid, Dataset};
use tqff_core::featmap::{build_feature_map, Method};
use tqff_core::gp::{
    ff_fit, full_gp_fit, full_gp_predict, initial_hyper, metrics, AdamConfig, FeatureGp, GpModel,
};
use tqff_core::{Hyperparams, KernelSpec};

#[test]
fn lengthscale_is_recovered_from_gp_draws() {
    let truth = KernelSpec::se(Hyperparams::new(vec![0.2], 1.0, 0.01).unwrap(), 1.15).unwrap();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Mat::from_fn(1000, 1, |_, _| rng.random::<f64>());
        let y = sample_gp(&truth, x.as_ref(), &mut rng).unwrap();
        let data = Dataset::new(x, y).unwrap();
        let init = KernelSpec::se(initial_hyper(&data).unwrap(), 1.15).unwrap();
        let map = build_feature_map(Method::Tqff, &init, 60, None).unwrap();
        let cfg = AdamConfig { lr: 0.05, iters: 300, ..AdamConfig::default() };
        let model = ff_fit(&map, &data, &cfg).unwrap();
        let theta = model.gp.hyper().lengthscales[0];
        assert!((theta - 0.2).abs() <= 0.3 * 0.2, "seed {seed}: theta {theta}");
    }
}

#[test]
fn tqff_keeps_extrapolation_variance_and_rff_starves() {
    let data = gen_toy(1000, 1).unwrap();
    let init = KernelSpec::se(initial_hyper(&data).unwrap(), 1.15).unwrap();
    let cfg = AdamConfig { lr: 0.05, iters: 200, ..AdamConfig::default() };
    let spec = full_gp_fit(&init, &data, &cfg, Some((300, 1))).unwrap();
    // extrapolation region [-1, -0.2]
    let grid = Mat::from_fn(100, 1, |i, _| -1.0 + 0.8 * i as f64 / 99.0);
    let full = full_gp_predict(&spec, &data, grid.as_ref()).unwrap().sd_latent();

    let tq = build_feature_map(Method::Tqff, &spec, 70, None).unwrap();
    let tq = FeatureGp::condition(tq, &data).unwrap().predict(grid.as_ref()).unwrap().sd_latent();
    for (a, b) in tq.iter().zip(&full) {
        assert!((a - b).abs() <= 0.1 * b, "tqff sd {a} vs full {b}");
    }

    let rff = build_feature_map(Method::Rff, &spec, 300, Some(1)).unwrap();
    let rff = FeatureGp::condition(rff, &data).unwrap().predict(grid.as_ref()).unwrap().sd_latent();
    assert!(rff.iter().zip(&full).any(|(a, b)| a < b));
}

#[test]
fn fitted_model_survives_json_and_predicts_held_out_data() {
    let data = gen_toy(600, 2).unwrap();
    let (train, test) = split(&data, 0.8, 2).unwrap();
    let init = KernelSpec::se(initial_hyper(&train).unwrap(), 1.15).unwrap();
    let map = build_feature_map(Method::Tqff, &init, 40, None).unwrap();
    let cfg = AdamConfig { lr: 0.05, iters: 150, ..AdamConfig::default() };
    let model = ff_fit(&map, &train, &cfg).unwrap();
    assert!(model.losses.last().unwrap() < &model.losses[0]);

    let back = GpModel::from_json(&model.to_json()).unwrap();
    let a = model.predict(test.x.as_ref()).unwrap();
    let b = back.predict(test.x.as_ref()).unwrap();
    assert_eq!(a, b);

    // noise sd is 0.1 in raw units; normalized targets have unit sd
    let m = metrics(&a, &test.y).unwrap();
    assert!(m.rmse < 0.2, "rmse {}", m.rmse);
}

#[test]
fn predictions_are_finite_across_the_toy_grid() {
    let data = gen_toy(300, 3).unwrap();
    let spec = KernelSpec::se(Hyperparams::new(vec![0.05], 1.0, 0.02).unwrap(), 1.15).unwrap();
    let grid = toy_test_grid(200);
    for method in Method::ALL {
        let map = build_feature_map(method, &spec, 30, Some(3)).unwrap();
        let pred = FeatureGp::condition(map, &data).unwrap().predict(grid.as_ref()).unwrap();
        assert!(pred.means.iter().chain(&pred.variances).all(|v| v.is_finite()));
        assert!(pred.variances.iter().all(|v| *v >= 0.02));
    }
}
