//! Central finite differences over the squared error of a single prediction.
//! Deliberately brute force: two full forward passes per parameter and no
//! shared code with the backward pass.

use super::{Gradients, Model};
use crate::{Error, Result};

/// Magnitudes below this are compared absolutely rather than relatively.
/// Central differences at step 1e-5 carry roundoff near `1e-16 * loss / 1e-5`,
/// about 1e-11, so tiny gradients cannot be resolved to a relative 1e-5.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-5;

pub fn numerical_gradients(model: &Model, window: &[f64], target: f64, epsilon: f64) -> Result<Gradients> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig("epsilon must be positive"));
    }
    let loss = |m: &Model| -> Result<f64> {
        let p = m.predict(window)?;
        Ok((p - target) * (p - target))
    };

    let mut probe = model.clone();
    let mut grads = Gradients::zeros_like(model);
    for layer in 0..model.params().len() {
        for k in 0..model.params()[layer].values().len() {
            let theta = model.params()[layer].values()[k];
            probe.params_mut()[layer].values_mut()[k] = theta + epsilon;
            let up = loss(&probe)?;
            probe.params_mut()[layer].values_mut()[k] = theta - epsilon;
            let down = loss(&probe)?;
            probe.params_mut()[layer].values_mut()[k] = theta;
            grads.layers[layer].values_mut()[k] = (up - down) / (2.0 * epsilon);
        }
    }
    Ok(grads)
}

/// `|a - b| / max(|a|, |b|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR)
}

pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    analytic
        .flatten()
        .iter()
        .zip(numeric.flatten())
        .map(|(&a, n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::tests::unit_scaler;
    use crate::lstm::{init_model, LayerSpec};
    use crate::rng::Rng;
    use std::vec::Vec;

    fn random_case(seed: u64) -> (Model, Vec<f64>, f64) {
        let mut rng = Rng::new(seed ^ 0xABCD);
        let lookback = 1 + rng.below(4);
        let mut model = init_model(&LayerSpec::default_stack(), unit_scaler(), lookback, seed).unwrap();
        // Perturb biases too so no parameter sits at an initialization constant.
        let flat: Vec<f64> = model.flat_params().iter().map(|&x| x + rng.symmetric(0.3)).collect();
        model.set_flat_params(&flat).unwrap();
        let window = (0..lookback).map(|_| rng.next_f64() * 1.4 - 0.2).collect();
        (model, window, rng.next_f64())
    }

    #[test]
    fn counts_two_forward_passes_per_parameter() {
        let (model, _, _) = random_case(1);
        assert_eq!(2 * model.param_count(), 244);
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let (model, window, target) = random_case(seed);
            let (pred, cache) = model.forward(&window).unwrap();
            let analytic = model.backward(&cache, 2.0 * (pred - target)).unwrap();
            let numeric = numerical_gradients(&model, &window, target, 1e-5).unwrap();
            worst = worst.max(max_relative_error(&analytic, &numeric));
        }
        assert!(worst <= 1e-5, "max relative error {worst:e}");
    }

    #[test]
    fn halving_epsilon_is_second_order() {
        let (model, window, target) = random_case(7);
        let coarse = numerical_gradients(&model, &window, target, 1e-2).unwrap().flatten();
        let mid = numerical_gradients(&model, &window, target, 5e-3).unwrap().flatten();
        let fine = numerical_gradients(&model, &window, target, 2.5e-3).unwrap().flatten();
        // Richardson: successive differences shrink by about 4 when error is O(eps^2).
        let d1: f64 = coarse.iter().zip(&mid).map(|(a, b)| (a - b).abs()).sum();
        let d2: f64 = mid.iter().zip(&fine).map(|(a, b)| (a - b).abs()).sum();
        let ratio = d1 / d2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let (model, window, target) = random_case(2);
        assert!(numerical_gradients(&model, &window, target, 0.0).is_err());
    }
}
