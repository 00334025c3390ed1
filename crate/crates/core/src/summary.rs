//! Loss-history summaries and original-unit error.

use crate::train::mse;
use crate::{Error, Result};

/// `(highest, lowest)` over an epoch-loss history.
pub fn loss_summary(epoch_losses: &[f64]) -> Result<(f64, f64)> {
    if epoch_losses.is_empty() {
        return Err(Error::Empty);
    }
    Ok(epoch_losses
        .iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &x| {
            (hi.max(x), lo.min(x))
        }))
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    mse(predictions, targets).map(libm::sqrt)
}
