//! Teacher-forced one-step predictions and recursive multi-step forecasts.

use alloc::vec::Vec;

use crate::lstm::Model;
use crate::preprocess::WindowedDataset;
use crate::{Error, Result};

/// Anything that maps a fixed-length window to a next-value prediction.
pub trait Forecaster {
    fn lookback(&self) -> usize;
    fn predict(&self, window: &[f64]) -> Result<f64>;
}

impl Forecaster for Model {
    fn lookback(&self) -> usize {
        Model::lookback(self)
    }

    fn predict(&self, window: &[f64]) -> Result<f64> {
        Model::predict(self, window)
    }
}

/// Predicts every window of `dataset` independently from true history.
pub fn predict_one_step_series<F: Forecaster + ?Sized>(model: &F, dataset: &WindowedDataset) -> Result<Vec<f64>> {
    if dataset.lookback != model.lookback() {
        return Err(Error::LookbackMismatch {
            model: model.lookback(),
            dataset: dataset.lookback,
        });
    }
    dataset.inputs.iter().map(|w| model.predict(w)).collect()
}

/// Feeds each prediction back as the newest input for `horizon` steps.
/// `seed_window` holds the last `lookback` scaled observations.
pub fn recursive_forecast<F: Forecaster + ?Sized>(model: &F, seed_window: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if horizon < 1 {
        return Err(Error::BadHorizon);
    }
    if seed_window.len() != model.lookback() {
        return Err(Error::DimensionMismatch {
            expected: model.lookback(),
            got: seed_window.len(),
        });
    }
    let mut window = seed_window.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let p = model.predict(&window)?;
        if !p.is_finite() {
            return Err(Error::NonFiniteForecast(step));
        }
        out.push(p);
        window.rotate_left(1);
        *window.last_mut().expect("lookback >= 1") = p;
    }
    Ok(out)
}

/// The window a forecast ends on: the last `lookback` values of seed
/// followed by predictions.
pub fn terminal_window(seed_window: &[f64], forecast: &[f64]) -> Vec<f64> {
    let n = seed_window.len();
    let joined: Vec<f64> = seed_window.iter().chain(forecast).copied().collect();
    joined[joined.len() - n..].to_vec()
}

/// `|p_k - p_{k-1}|` for every forecast step, with `p_{-1}` the newest seed value.
pub fn drift_trace(seed_window: &[f64], forecast: &[f64]) -> Vec<f64> {
    let first = seed_window.last().copied();
    first
        .into_iter()
        .chain(forecast.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .collect()
}

/// `|f(x, ..., x) - x|`: how far `x` is from a fixed point of the forecaster.
pub fn fixed_point_gap<F: Forecaster + ?Sized>(model: &F, x: f64) -> Result<f64> {
    let window: Vec<f64> = core::iter::repeat_n(x, model.lookback()).collect();
    Ok((model.predict(&window)? - x).abs())
}
