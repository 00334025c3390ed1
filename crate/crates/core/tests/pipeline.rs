use tradecast_core::forecast::{drift_trace, fixed_point_gap, terminal_window};
use tradecast_core::lstm::validate_chain;
use tradecast_core::train::evaluate_loss;
use tradecast_core::{
    fit_scaler, init_model, inverse_scale, make_windows, predict_one_step_series, recursive_forecast, scale,
    split_values, train_model, Error, FitScope, LayerSpec, SplitSpec, TrainConfig,
};

fn sawtooth(n: usize) -> Vec<f64> {
    (0..n).map(|k| 1000.0 + 40.0 * (k % 50) as f64).collect()
}

#[test]
fn scale_window_train_forecast() {
    let values = sawtooth(300);
    let split = SplitSpec::new(0.7).unwrap();
    let (train, test) = split_values(&values, &split).unwrap();
    assert_eq!((train.len(), test.len()), (210, 90));

    let scaler = fit_scaler(train, FitScope::TrainOnly).unwrap();
    let lookback = 3;
    let train_ds = make_windows(&scale(train, &scaler), lookback).unwrap();
    let test_ds = make_windows(&scale(test, &scaler), lookback).unwrap();
    let initial = init_model(&LayerSpec::default_stack(), scaler, lookback, 9).unwrap();
    let config = TrainConfig {
        epochs: 15,
        shuffle: true,
        seed: 9,
        ..TrainConfig::default()
    };
    let (model, report) = train_model(&initial, &train_ds, &test_ds, &config).unwrap();
    assert_eq!(report.epoch_losses.len(), 15);
    assert!(report.final_train_loss < evaluate_loss(&initial, &train_ds).unwrap());
    assert_eq!(report.final_test_loss, evaluate_loss(&model, &test_ds).unwrap());

    let one_step = predict_one_step_series(&model, &test_ds).unwrap();
    assert_eq!(one_step.len(), test_ds.len());

    let seed = scale(&test[test.len() - lookback..], &scaler);
    let path = recursive_forecast(&model, &seed, 40).unwrap();
    assert_eq!(path.len(), 40);
    assert_eq!(terminal_window(&seed, &path), path[37..].to_vec());
    assert_eq!(drift_trace(&seed, &path).len(), 40);
    assert!(path.iter().all(|x| x.is_finite()));
    let original = inverse_scale(&path, &scaler);
    assert!(original.iter().all(|x| x.is_finite()));
}

#[test]
fn lookback_one_forecast_settles_on_a_fixed_point() {
    let values = sawtooth(200);
    let (train, test) = split_values(&values, &SplitSpec::new(0.7).unwrap()).unwrap();
    let scaler = fit_scaler(train, FitScope::TrainOnly).unwrap();
    let train_ds = make_windows(&scale(train, &scaler), 1).unwrap();
    let test_ds = make_windows(&scale(test, &scaler), 1).unwrap();
    let initial = init_model(&LayerSpec::default_stack(), scaler, 1, 0).unwrap();
    let config = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let (model, _) = train_model(&initial, &train_ds, &test_ds, &config).unwrap();
    let path = recursive_forecast(&model, &[0.5], 2000).unwrap();
    let last = path[1999];
    assert!(fixed_point_gap(&model, last).unwrap() < 1e-9);
}

#[test]
fn mismatched_lookback_is_rejected() {
    let values = sawtooth(100);
    let scaler = fit_scaler(&values, FitScope::FullSeries).unwrap();
    let ds = make_windows(&scale(&values, &scaler), 2).unwrap();
    let model = init_model(&LayerSpec::default_stack(), scaler, 1, 0).unwrap();
    assert!(matches!(
        train_model(&model, &ds, &ds, &TrainConfig::default()),
        Err(Error::LookbackMismatch { model: 1, dataset: 2 })
    ));
}

#[test]
fn stacks_must_chain() {
    assert!(validate_chain(&LayerSpec::default_stack()).is_ok());
    let broken = [
        LayerSpec::lstm(1, 4, true),
        LayerSpec::lstm(3, 1, false),
        LayerSpec::dense(1, 1),
    ];
    assert!(validate_chain(&broken).is_err());
    assert!(validate_chain(&[LayerSpec::dense(1, 1)]).is_err());
}
