use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series is constant; min-max scaling needs max > min")]
    ConstantSeries,
    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("train fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("lookback must be at least 1")]
    ZeroLookback,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid layer chain: {0}")]
    BadChain(&'static str),
    #[error("forward cache does not match the model")]
    StaleCache,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("parameter and gradient shapes disagree: {params} vs {grads}")]
    ShapeMismatch { params: usize, grads: usize },
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, sample {sample}")]
    NonFiniteLoss { epoch: usize, sample: usize },
    #[error("dataset lookback {dataset} does not match model lookback {model}")]
    LookbackMismatch { model: usize, dataset: usize },
    #[error("forecast horizon must be at least 1")]
    BadHorizon,
    #[error("non-finite forecast value at step {0}")]
    NonFiniteForecast(usize),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
}
