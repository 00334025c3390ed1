//! Numerics for a small stacked-LSTM time-series forecaster.
//!
//! Everything here is pure and allocation-only (`alloc`, no `std`): min-max
//! scaling and windowing, the LSTM forward pass with backpropagation through
//! time, the Adam optimizer and training loop, and recursive multi-step
//! forecasting. File formats, CSV ingestion and the command line live in the
//! `tradecast` crate.

#![no_std]
// NaN-rejecting `!(x > 0.0)` checks and index loops over gate matrices are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod forecast;
pub mod lstm;
pub mod preprocess;
pub mod rng;
pub mod summary;
pub mod train;

pub use error::{Error, Result};
pub use forecast::{predict_one_step_series, recursive_forecast, Forecaster};
pub use lstm::{init_model, numerical_gradients, param_count, Gradients, LayerKind, LayerParams, LayerSpec, Model};
pub use preprocess::{
    fit_scaler, inverse_scale, make_windows, scale, split_values, FitScope, ScalerParams, SplitSpec, WindowedDataset,
};
pub use rng::Rng;
pub use summary::{loss_summary, rmse};
pub use train::{adam_step, mse, mse_grad, train_model, AdamState, TrainConfig, TrainReport};
