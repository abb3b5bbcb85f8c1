use cpse_core::config::RunConfig;
use cpse_core::container::TensorData;
use cpse_core::spectral::eig_sym;
use cpse_core::{build_ensemble, ergodicity_trend, generate_stack, SurrogateSpec};

#[test]
fn eigenvalue_scale_is_order_one() {
    let c = generate_stack(&SurrogateSpec::square(&[16, 64, 256, 1024], 0)).unwrap();
    let e = build_ensemble(&c, &Default::default()).unwrap();
    for layer in e.layers() {
        let v = eig_sym(layer).unwrap().values;
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((0.1..=10.0).contains(&mean), "{}: {mean}", layer.source_name);
    }
}

#[test]
fn entries_look_standard_normal_after_rescaling() {
    let c = generate_stack(&SurrogateSpec::gaussian(vec![(200, 400)], 9)).unwrap();
    let TensorData::F64(v) = &c.layers[0].data else {
        panic!()
    };
    let scaled: Vec<f64> = v.iter().map(|x| x * 20.0).collect();
    let n = scaled.len() as f64;
    let mean = scaled.iter().sum::<f64>() / n;
    let var = scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 0.02, "{mean}");
    assert!((var - 1.0).abs() < 0.02, "{var}");
}

#[test]
fn trend_is_deterministic_and_decreasing() {
    let c = generate_stack(&SurrogateSpec::square(&[16, 32, 64, 128, 256], 4)).unwrap();
    let cfg = RunConfig::default();
    let a = ergodicity_trend(&c, &cfg).unwrap();
    let b = ergodicity_trend(
        &generate_stack(&SurrogateSpec::square(&[16, 32, 64, 128, 256], 4)).unwrap(),
        &cfg,
    )
    .unwrap();
    assert_eq!(a, b);
    assert!(a.spearman.unwrap() <= -0.8, "{:?}", a.spearman);
    assert_eq!(a.series.len(), 4);
}

#[test]
fn too_few_layers_for_a_trend() {
    let c = generate_stack(&SurrogateSpec::square(&[16, 32], 1)).unwrap();
    let err = ergodicity_trend(&c, &RunConfig::default()).unwrap_err();
    assert!(err.to_string().contains("need >= 3 layers"), "{err}");
}
