//! Mean squared error, Adam, and the sample-by-sample training loop.

use alloc::vec;
use alloc::vec::Vec;

use crate::forecast::predict_one_step_series;
use crate::lstm::{Gradients, Model, RecurrentState};
use crate::preprocess::WindowedDataset;
use crate::rng::Rng;
use crate::{Error, Result};

/// XORed into the seed for the shuffle stream so it never replays the
/// initialization draws.
const SHUFFLE_STREAM: u64 = 0x5348_5546_464C_4531;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub train_fraction: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle: bool,
    /// Carry LSTM state from one training sample into the next instead of
    /// starting every sample from zero. Gradients are truncated at the window.
    pub stateful: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            batch_size: 1,
            epochs: 100,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle: false,
            stateful: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidFraction(self.train_fraction));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return Err(Error::InvalidConfig("beta1 must lie in (0, 1)"));
        }
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::InvalidConfig("beta2 must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive"));
        }
        if self.stateful && self.shuffle {
            return Err(Error::InvalidConfig("stateful training requires temporal order"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One Adam update with bias correction. Inputs are left untouched.
pub fn adam_step(
    params: &[f64],
    grads: &[f64],
    state: &AdamState,
    config: &TrainConfig,
) -> Result<(Vec<f64>, AdamState)> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::ShapeMismatch {
            params: params.len(),
            grads: grads.len(),
        });
    }
    let t = state.t + 1;
    let bias1 = 1.0 - libm::pow(config.beta1, t as f64);
    let bias2 = 1.0 - libm::pow(config.beta2, t as f64);

    let mut next = AdamState {
        m: Vec::with_capacity(params.len()),
        v: Vec::with_capacity(params.len()),
        t,
    };
    let updated = params
        .iter()
        .zip(grads)
        .zip(state.m.iter().zip(&state.v))
        .map(|((&theta, &g), (&m, &v))| {
            let m = config.beta1 * m + (1.0 - config.beta1) * g;
            let v = config.beta2 * v + (1.0 - config.beta2) * g * g;
            next.m.push(m);
            next.v.push(v);
            let m_hat = m / bias1;
            let v_hat = v / bias2;
            theta - config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.epsilon)
        })
        .collect();
    Ok((updated, next))
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty);
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / predictions.len() as f64)
}

/// Derivative of the single-sample squared error w.r.t. the prediction.
pub fn mse_grad(prediction: f64, target: f64) -> f64 {
    2.0 * (prediction - target)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean per-sample scaled MSE of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    /// Filled in by the caller; this crate has no clock.
    pub wall_time_secs: f64,
}

/// Scaled MSE of teacher-forced one-step predictions over `dataset`.
pub fn evaluate_loss(model: &Model, dataset: &WindowedDataset) -> Result<f64> {
    let predictions = predict_one_step_series(model, dataset)?;
    mse(&predictions, &dataset.targets)
}

pub fn train_model(
    model: &Model,
    train: &WindowedDataset,
    test: &WindowedDataset,
    config: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for ds in [train, test] {
        if ds.lookback != model.lookback() {
            return Err(Error::LookbackMismatch {
                model: model.lookback(),
                dataset: ds.lookback,
            });
        }
    }

    let mut model = model.clone();
    let mut params = model.flat_params();
    let mut adam = AdamState::new(params.len());
    let mut shuffler = Rng::new(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            shuffler.shuffle(&mut order);
        }
        let mut state: Option<RecurrentState> = None;
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut batch_grads = Gradients::zeros_like(&model);
            for &sample in batch {
                let window = &train.inputs[sample];
                let target = train.targets[sample];
                let (pred, cache) = model.forward_from(window, state.as_ref())?;
                let loss = (pred - target) * (pred - target);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, sample });
                }
                loss_sum += loss;
                let grads = model.backward(&cache, mse_grad(pred, target))?;
                batch_grads.add_scaled(&grads, 1.0 / batch.len() as f64);
                if config.stateful {
                    state = Some(cache.final_state());
                }
            }
            let (next, next_adam) = adam_step(&params, &batch_grads.flatten(), &adam, config)?;
            params = next;
            adam = next_adam;
            model.set_flat_params(&params)?;
        }
        epoch_losses.push(loss_sum / train.len() as f64);
    }

    let report = TrainReport {
        epoch_losses,
        final_train_loss: evaluate_loss(&model, train)?,
        final_test_loss: evaluate_loss(&model, test)?,
        wall_time_secs: 0.0,
    };
    Ok((model, report))
}
