//! Training-configuration file: a JSON object using `TrainConfig` field
//! names. Every field is optional; present fields override the defaults and
//! are in turn overridden by command-line flags.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use tradecast_core::TrainConfig;

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub train_fraction: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub shuffle: Option<bool>,
    pub stateful: Option<bool>,
    pub seed: Option<u64>,
}

impl ConfigOverrides {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Later sources win: `self` is applied on top of `base`.
    pub fn apply(&self, base: TrainConfig) -> TrainConfig {
        TrainConfig {
            train_fraction: self.train_fraction.unwrap_or(base.train_fraction),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            beta1: self.beta1.unwrap_or(base.beta1),
            beta2: self.beta2.unwrap_or(base.beta2),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            shuffle: self.shuffle.unwrap_or(base.shuffle),
            stateful: self.stateful.unwrap_or(base.stateful),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}
