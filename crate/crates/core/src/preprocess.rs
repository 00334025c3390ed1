//! Min-max scaling, chronological train/test split and supervised windowing.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Which part of the series the scaler bounds were taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitScope {
    #[default]
    TrainOnly,
    FullSeries,
}

impl FitScope {
    pub fn as_str(self) -> &'static str {
        match self {
            FitScope::TrainOnly => "train_only",
            FitScope::FullSeries => "full_series",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train_only" | "train-only" => Some(FitScope::TrainOnly),
            "full_series" | "full-series" => Some(FitScope::FullSeries),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalerParams {
    pub min_value: f64,
    pub max_value: f64,
    pub fit_scope: FitScope,
}

impl ScalerParams {
    pub fn new(min_value: f64, max_value: f64, fit_scope: FitScope) -> Result<Self> {
        if !(max_value > min_value) || !min_value.is_finite() || !max_value.is_finite() {
            return Err(Error::ConstantSeries);
        }
        Ok(Self {
            min_value,
            max_value,
            fit_scope,
        })
    }

    fn range(&self) -> f64 {
        self.max_value - self.min_value
    }

    pub fn scale_one(&self, x: f64) -> f64 {
        (x - self.min_value) / self.range()
    }

    pub fn inverse_one(&self, s: f64) -> f64 {
        s * self.range() + self.min_value
    }
}

pub fn fit_scaler(values: &[f64], scope: FitScope) -> Result<ScalerParams> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    ScalerParams::new(min, max, scope)
}

/// Maps each value to `(x - min) / (max - min)`. Values outside the fitted
/// range extrapolate past `[0, 1]`.
pub fn scale(values: &[f64], params: &ScalerParams) -> Vec<f64> {
    values.iter().map(|&x| params.scale_one(x)).collect()
}

pub fn inverse_scale(scaled: &[f64], params: &ScalerParams) -> Vec<f64> {
    scaled.iter().map(|&s| params.inverse_one(s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidFraction(train_fraction));
        }
        Ok(Self { train_fraction })
    }

    /// Number of leading values that go to the training partition.
    pub fn train_len(&self, n: usize) -> usize {
        libm::floor(n as f64 * self.train_fraction) as usize
    }
}

/// Splits chronologically: the first `floor(n * fraction)` values train, the
/// rest test. Both partitions must be non-empty.
pub fn split_values<'a>(values: &'a [f64], spec: &SplitSpec) -> Result<(&'a [f64], &'a [f64])> {
    let cut = spec.train_len(values.len());
    if cut == 0 || cut == values.len() {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    Ok(values.split_at(cut))
}

/// Supervised pairs: `inputs[k]` is the `lookback` values immediately before
/// `targets[k]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowedDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub lookback: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.inputs.iter().map(Vec::as_slice).zip(self.targets.iter().copied())
    }
}

pub fn make_windows(values: &[f64], lookback: usize) -> Result<WindowedDataset> {
    if lookback == 0 {
        return Err(Error::ZeroLookback);
    }
    if values.len() < lookback + 1 {
        return Err(Error::TooShort {
            needed: lookback + 1,
            got: values.len(),
        });
    }
    let inputs = values
        .windows(lookback)
        .take(values.len() - lookback)
        .map(<[f64]>::to_vec)
        .collect();
    Ok(WindowedDataset {
        inputs,
        targets: values[lookback..].to_vec(),
        lookback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn params(min: f64, max: f64) -> ScalerParams {
        ScalerParams::new(min, max, FitScope::TrainOnly).unwrap()
    }

    #[test]
    fn fit_scaler_examples() {
        let p = fit_scaler(&[2.0, 4.0, 6.0], FitScope::TrainOnly).unwrap();
        assert_eq!((p.min_value, p.max_value), (2.0, 6.0));
        let p = fit_scaler(&[-1.0, 0.0, 3.0], FitScope::FullSeries).unwrap();
        assert_eq!((p.min_value, p.max_value), (-1.0, 3.0));
        assert_eq!(p.fit_scope, FitScope::FullSeries);
        assert_eq!(
            fit_scaler(&[5.0, 5.0, 5.0], FitScope::TrainOnly),
            Err(Error::ConstantSeries)
        );
        assert_eq!(fit_scaler(&[], FitScope::TrainOnly), Err(Error::Empty));
    }

    #[test]
    fn scale_examples() {
        let p = params(2.0, 6.0);
        assert_eq!(scale(&[2.0, 4.0, 6.0], &p), vec![0.0, 0.5, 1.0]);
        assert_eq!(scale(&[2.0], &p), vec![0.0]);
        assert_eq!(scale(&[8.0], &p), vec![1.5]);
        assert_eq!(inverse_scale(&[0.0, 0.5, 1.0], &p), vec![2.0, 4.0, 6.0]);
        assert!(inverse_scale(&[], &p).is_empty());
    }

    #[test]
    fn split_examples() {
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        let (train, test) = split_values(&v, &SplitSpec::new(0.7).unwrap()).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
        let (train, test) = split_values(&v, &SplitSpec::new(0.75).unwrap()).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
        assert!(matches!(
            split_values(&[1.0], &SplitSpec::new(0.7).unwrap()),
            Err(Error::TooShort { .. })
        ));
        assert!(SplitSpec::new(1.0).is_err());
        assert!(SplitSpec::new(0.0).is_err());
        assert!(SplitSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn window_examples() {
        let ds = make_windows(&[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(ds.inputs, vec![vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(ds.targets, vec![2.0, 3.0, 4.0]);
        let ds = make_windows(&[10.0, 20.0, 30.0, 40.0], 2).unwrap();
        assert_eq!(ds.inputs, vec![vec![10.0, 20.0], vec![20.0, 30.0]]);
        assert_eq!(ds.targets, vec![30.0, 40.0]);
        assert!(matches!(
            make_windows(&[1.0, 2.0], 2),
            Err(Error::TooShort { needed: 3, got: 2 })
        ));
        assert_eq!(make_windows(&[1.0, 2.0], 0), Err(Error::ZeroLookback));
    }

    proptest! {
        #[test]
        fn scale_preserves_order(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let p = params(-1e6, 1e6 + 1.0);
            let s = scale(&[a, b], &p);
            prop_assert_eq!(a < b, s[0] < s[1]);
        }

        #[test]
        fn split_never_drops_or_duplicates(
            v in proptest::collection::vec(-1e3f64..1e3, 2..200),
            f in 0.01f64..0.99,
        ) {
            let spec = SplitSpec::new(f).unwrap();
            if let Ok((train, test)) = split_values(&v, &spec) {
                let joined: Vec<f64> = train.iter().chain(test).copied().collect();
                prop_assert_eq!(joined, v);
            }
        }

        #[test]
        fn windows_end_right_before_target(
            v in proptest::collection::vec(-1e3f64..1e3, 2..60),
            lookback in 1usize..6,
        ) {
            prop_assume!(v.len() > lookback);
            let ds = make_windows(&v, lookback).unwrap();
            prop_assert_eq!(ds.len(), v.len() - lookback);
            for (k, (w, t)) in ds.iter().enumerate() {
                prop_assert_eq!(w.len(), lookback);
                prop_assert_eq!(w, &v[k..k + lookback]);
                prop_assert_eq!(t, v[k + lookback]);
            }
        }
    }
}
