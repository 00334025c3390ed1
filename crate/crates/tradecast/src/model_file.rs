//! `model.json`: layer specs, flat parameters, scaler, lookback, seed and the
//! training configuration that produced the model.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tradecast_core::lstm::{LayerKind, LayerParams, LayerSpec};
use tradecast_core::{FitScope, Model, ScalerParams, TrainConfig};

use crate::json::to_string_sorted;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerSpecFile {
    kind: String,
    input_dim: usize,
    units: usize,
    returns_sequence: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalerFile {
    pub min_value: f64,
    pub max_value: f64,
    pub fit_scope: String,
}

impl From<&ScalerParams> for ScalerFile {
    fn from(s: &ScalerParams) -> Self {
        Self {
            min_value: s.min_value,
            max_value: s.max_value,
            fit_scope: s.fit_scope.as_str().into(),
        }
    }
}

impl TryFrom<&ScalerFile> for ScalerParams {
    type Error = Error;

    fn try_from(s: &ScalerFile) -> Result<Self> {
        let scope = FitScope::parse(&s.fit_scope)
            .ok_or_else(|| Error::ModelFormat(format!("unknown fit_scope `{}`", s.fit_scope)))?;
        Ok(ScalerParams::new(s.min_value, s.max_value, scope)?)
    }
}

/// Serialized form of [`TrainConfig`]; field names match the struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfigFile {
    pub train_fraction: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle: bool,
    pub stateful: bool,
    pub seed: u64,
}

impl From<&TrainConfig> for TrainConfigFile {
    fn from(c: &TrainConfig) -> Self {
        Self {
            train_fraction: c.train_fraction,
            batch_size: c.batch_size,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            shuffle: c.shuffle,
            stateful: c.stateful,
            seed: c.seed,
        }
    }
}

impl From<&TrainConfigFile> for TrainConfig {
    fn from(c: &TrainConfigFile) -> Self {
        Self {
            train_fraction: c.train_fraction,
            batch_size: c.batch_size,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            shuffle: c.shuffle,
            stateful: c.stateful,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFileRepr {
    format_version: u32,
    layer_specs: Vec<LayerSpecFile>,
    parameters: Vec<Vec<f64>>,
    scaler: ScalerFile,
    lookback: usize,
    seed: u64,
    train_config: TrainConfigFile,
}

/// A trained model together with the configuration it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    pub train_config: TrainConfig,
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        if let Some(bad) = self.model.flat_params().iter().find(|x| !x.is_finite()) {
            return Err(Error::ModelFormat(format!("non-finite parameter {bad}")));
        }
        let repr = ModelFileRepr {
            format_version: FORMAT_VERSION,
            layer_specs: self
                .model
                .specs()
                .iter()
                .map(|s| LayerSpecFile {
                    kind: s.kind.as_str().into(),
                    input_dim: s.input_dim,
                    units: s.units,
                    returns_sequence: s.returns_sequence,
                })
                .collect(),
            parameters: self.model.params().iter().map(|p| p.values().to_vec()).collect(),
            scaler: self.model.scaler().into(),
            lookback: self.model.lookback(),
            seed: self.model.seed(),
            train_config: (&self.train_config).into(),
        };
        to_string_sorted(&repr)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: ModelFileRepr = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if repr.format_version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format_version {}",
                repr.format_version
            )));
        }
        let specs = repr
            .layer_specs
            .iter()
            .map(|s| {
                let kind = LayerKind::parse(&s.kind)
                    .ok_or_else(|| Error::ModelFormat(format!("unknown layer kind `{}`", s.kind)))?;
                Ok(LayerSpec {
                    kind,
                    input_dim: s.input_dim,
                    units: s.units,
                    returns_sequence: s.returns_sequence,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if repr.parameters.len() != specs.len() {
            return Err(Error::ModelFormat(format!(
                "{} parameter blocks for {} layers",
                repr.parameters.len(),
                specs.len()
            )));
        }
        let params = specs
            .iter()
            .zip(&repr.parameters)
            .map(|(spec, values)| {
                let mut layer = LayerParams::zeros(spec);
                if layer.values().len() != values.len() {
                    return Err(Error::ModelFormat(format!(
                        "{} layer expects {} parameters, found {}",
                        spec.kind.as_str(),
                        layer.values().len(),
                        values.len()
                    )));
                }
                layer.values_mut().copy_from_slice(values);
                Ok(layer)
            })
            .collect::<Result<Vec<_>>>()?;
        let scaler = ScalerParams::try_from(&repr.scaler)?;
        let model = Model::from_parts(specs, params, scaler, repr.lookback, repr.seed)?;
        Ok(Self {
            model,
            train_config: (&repr.train_config).into(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tradecast_core::init_model;

    fn sample(seed: u64) -> ModelFile {
        let scaler = ScalerParams::new(-3.5, 1e10, FitScope::TrainOnly).unwrap();
        ModelFile {
            model: init_model(&LayerSpec::default_stack(), scaler, 1, seed).unwrap(),
            train_config: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
        }
    }

    #[test]
    fn top_level_keys_are_sorted() {
        let text = sample(1).to_json().unwrap();
        let keys: Vec<usize> = [
            "\"format_version\"",
            "\"layer_specs\"",
            "\"lookback\"",
            "\"parameters\"",
            "\"scaler\"",
            "\"seed\"",
            "\"train_config\"",
        ]
        .iter()
        .map(|k| text.find(k).unwrap())
        .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("\"format_version\": 1"));
    }

    #[test]
    fn rejects_corrupt_files() {
        let text = sample(1).to_json().unwrap();
        let v2 = text.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(ModelFile::from_json(&v2), Err(Error::ModelFormat(_))));
        let bad_kind = text.replacen("\"lstm\"", "\"gru\"", 1);
        assert!(ModelFile::from_json(&bad_kind).is_err());
        let bad_scope = text.replace("train_only", "sometimes");
        assert!(ModelFile::from_json(&bad_scope).is_err());
        assert!(ModelFile::from_json("{}").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn write_then_read_is_bit_exact(seed in any::<u64>(), noise in any::<u64>()) {
            let mut file = sample(seed);
            // Spread parameters over many magnitudes.
            let mut rng = tradecast_core::Rng::new(noise);
            let flat: Vec<f64> = file
                .model
                .flat_params()
                .iter()
                .map(|x| x * 10f64.powi(rng.below(40) as i32 - 20))
                .collect();
            file.model.set_flat_params(&flat).unwrap();
            let text = file.to_json().unwrap();
            let back = ModelFile::from_json(&text).unwrap();
            let bits = |m: &Model| m.flat_params().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.model), bits(&file.model));
            prop_assert_eq!(&back, &file);
            prop_assert_eq!(back.to_json().unwrap(), text);
        }
    }
}
