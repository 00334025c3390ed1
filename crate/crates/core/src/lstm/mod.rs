//! Stacked LSTM regressor: `LSTM -> ... -> LSTM -> Dense(1)`.
//!
//! Parameters are stored flat per layer. An LSTM layer with `n` units and `m`
//! inputs holds, in order:
//!
//! * `W`: four `n x m` matrices for the gates `i, f, c~, o`, row-major;
//! * `U`: four `n x n` recurrent matrices, same gate order;
//! * `b`: four length-`n` bias vectors, same gate order.
//!
//! A dense layer holds its `units x input_dim` weight matrix (row-major)
//! followed by its bias. [`init_model`] draws weights in exactly this order, and
//! the model file stores them in it too.

mod cell;
mod gradcheck;
mod network;

use alloc::vec;
use alloc::vec::Vec;

use crate::preprocess::ScalerParams;
use crate::rng::Rng;
use crate::{Error, Result};

pub use cell::{cell_forward, sigmoid, CellStep};
pub use gradcheck::{max_relative_error, numerical_gradients, relative_error, RELATIVE_ERROR_FLOOR};
pub use network::{ForwardCache, RecurrentState};

/// Gate order inside every LSTM parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Candidate = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Candidate, Gate::Output];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Lstm,
    Dense,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Lstm => "lstm",
            LayerKind::Dense => "dense",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lstm" => Some(LayerKind::Lstm),
            "dense" => Some(LayerKind::Dense),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input_dim: usize,
    pub units: usize,
    /// LSTM only: emit the hidden state of every timestep instead of the last.
    pub returns_sequence: bool,
}

impl LayerSpec {
    pub const fn lstm(input_dim: usize, units: usize, returns_sequence: bool) -> Self {
        Self {
            kind: LayerKind::Lstm,
            input_dim,
            units,
            returns_sequence,
        }
    }

    pub const fn dense(input_dim: usize, units: usize) -> Self {
        Self {
            kind: LayerKind::Dense,
            input_dim,
            units,
            returns_sequence: false,
        }
    }

    /// `LSTM(4, return_sequences) -> LSTM(1) -> Dense(1)` on a univariate input.
    pub fn default_stack() -> Vec<LayerSpec> {
        vec![
            LayerSpec::lstm(1, 4, true),
            LayerSpec::lstm(4, 1, false),
            LayerSpec::dense(1, 1),
        ]
    }
}

pub fn param_count(spec: &LayerSpec) -> usize {
    match spec.kind {
        LayerKind::Lstm => 4 * (spec.input_dim + spec.units + 1) * spec.units,
        LayerKind::Dense => spec.input_dim * spec.units + spec.units,
    }
}

/// Checks that `specs` is one or more LSTM layers fed by a univariate input,
/// followed by a single `Dense(1)` head, with matching dimensions.
pub fn validate_chain(specs: &[LayerSpec]) -> Result<()> {
    let (head, body) = specs.split_last().ok_or(Error::BadChain("no layers"))?;
    if head.kind != LayerKind::Dense || head.units != 1 {
        return Err(Error::BadChain("last layer must be dense with one unit"));
    }
    if body.is_empty() {
        return Err(Error::BadChain("at least one LSTM layer is required"));
    }
    if body.iter().any(|s| s.kind != LayerKind::Lstm) {
        return Err(Error::BadChain("only the last layer may be dense"));
    }
    if specs.iter().any(|s| s.input_dim == 0 || s.units == 0) {
        return Err(Error::BadChain("layer dimensions must be positive"));
    }
    if body[0].input_dim != 1 {
        return Err(Error::BadChain("first layer must take a univariate input"));
    }
    for pair in specs.windows(2) {
        if pair[0].units != pair[1].input_dim {
            return Err(Error::BadChain("units do not match the next layer's input"));
        }
    }
    let (last_lstm, inner) = body.split_last().unwrap();
    if inner.iter().any(|s| !s.returns_sequence) {
        return Err(Error::BadChain("stacked LSTM layers must return sequences"));
    }
    if last_lstm.returns_sequence {
        return Err(Error::BadChain("the LSTM feeding the head must return its last state"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    input_dim: usize,
    units: usize,
    values: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, units: usize) -> Self {
        let len = param_count(&LayerSpec::lstm(input_dim, units, false));
        Self {
            input_dim,
            units,
            values: vec![0.0; len],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn units(&self) -> usize {
        self.units
    }

    fn w_len(&self) -> usize {
        4 * self.units * self.input_dim
    }

    fn u_len(&self) -> usize {
        4 * self.units * self.units
    }

    #[inline]
    pub fn w_index(&self, gate: Gate, row: usize, col: usize) -> usize {
        (gate as usize * self.units + row) * self.input_dim + col
    }

    #[inline]
    pub fn u_index(&self, gate: Gate, row: usize, col: usize) -> usize {
        self.w_len() + (gate as usize * self.units + row) * self.units + col
    }

    #[inline]
    pub fn b_index(&self, gate: Gate, row: usize) -> usize {
        self.w_len() + self.u_len() + gate as usize * self.units + row
    }

    pub fn w(&self, gate: Gate, row: usize, col: usize) -> f64 {
        self.values[self.w_index(gate, row, col)]
    }

    pub fn u(&self, gate: Gate, row: usize, col: usize) -> f64 {
        self.values[self.u_index(gate, row, col)]
    }

    pub fn b(&self, gate: Gate, row: usize) -> f64 {
        self.values[self.b_index(gate, row)]
    }

    pub fn set_w(&mut self, gate: Gate, row: usize, col: usize, v: f64) {
        let k = self.w_index(gate, row, col);
        self.values[k] = v;
    }

    pub fn set_u(&mut self, gate: Gate, row: usize, col: usize, v: f64) {
        let k = self.u_index(gate, row, col);
        self.values[k] = v;
    }

    pub fn set_b(&mut self, gate: Gate, row: usize, v: f64) {
        let k = self.b_index(gate, row);
        self.values[k] = v;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    input_dim: usize,
    units: usize,
    values: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(input_dim: usize, units: usize) -> Self {
        Self {
            input_dim,
            units,
            values: vec![0.0; input_dim * units + units],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.input_dim + col]
    }

    pub fn bias(&self, row: usize) -> f64 {
        self.values[self.input_dim * self.units + row]
    }

    pub fn set_weight(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.input_dim + col] = v;
    }

    pub fn set_bias(&mut self, row: usize, v: f64) {
        self.values[self.input_dim * self.units + row] = v;
    }

    /// Linear activation: `W h + b`.
    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: input.len(),
            });
        }
        Ok((0..self.units)
            .map(|r| {
                input
                    .iter()
                    .enumerate()
                    .fold(self.bias(r), |acc, (c, &x)| acc + self.weight(r, c) * x)
            })
            .collect())
    }
}

/// Parameters of one layer. Also used as the gradient record for that layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Lstm(LstmParams),
    Dense(DenseParams),
}

impl LayerParams {
    pub fn zeros(spec: &LayerSpec) -> Self {
        match spec.kind {
            LayerKind::Lstm => LayerParams::Lstm(LstmParams::zeros(spec.input_dim, spec.units)),
            LayerKind::Dense => LayerParams::Dense(DenseParams::zeros(spec.input_dim, spec.units)),
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            LayerParams::Lstm(p) => &p.values,
            LayerParams::Dense(p) => &p.values,
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            LayerParams::Lstm(p) => &mut p.values,
            LayerParams::Dense(p) => &mut p.values,
        }
    }

    fn matches(&self, spec: &LayerSpec) -> bool {
        match (self, spec.kind) {
            (LayerParams::Lstm(p), LayerKind::Lstm) => p.input_dim == spec.input_dim && p.units == spec.units,
            (LayerParams::Dense(p), LayerKind::Dense) => p.input_dim == spec.input_dim && p.units == spec.units,
            _ => false,
        }
    }
}

/// Gradient of a scalar loss with respect to every model parameter, laid out
/// exactly like the model's own parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            layers: model.specs.iter().map(LayerParams::zeros).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.values().iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.values().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elementwise `self += other * factor`.
    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.values_mut().iter_mut().zip(b.values()) {
                *x += y * factor;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    specs: Vec<LayerSpec>,
    params: Vec<LayerParams>,
    scaler: ScalerParams,
    lookback: usize,
    seed: u64,
}

impl Model {
    /// Assembles a model from stored parts, checking the chain and every
    /// parameter block's shape.
    pub fn from_parts(
        specs: Vec<LayerSpec>,
        params: Vec<LayerParams>,
        scaler: ScalerParams,
        lookback: usize,
        seed: u64,
    ) -> Result<Self> {
        validate_chain(&specs)?;
        if lookback == 0 {
            return Err(Error::ZeroLookback);
        }
        if params.len() != specs.len() {
            return Err(Error::DimensionMismatch {
                expected: specs.len(),
                got: params.len(),
            });
        }
        for (spec, p) in specs.iter().zip(&params) {
            if !p.matches(spec) {
                return Err(Error::DimensionMismatch {
                    expected: param_count(spec),
                    got: p.values().len(),
                });
            }
        }
        Ok(Self {
            specs,
            params,
            scaler,
            lookback,
            seed,
        })
    }

    /// Every parameter set to zero.
    pub fn zeroed(specs: Vec<LayerSpec>, scaler: ScalerParams, lookback: usize) -> Result<Self> {
        let params = specs.iter().map(LayerParams::zeros).collect();
        Self::from_parts(specs, params, scaler, lookback, 0)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[LayerParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams] {
        &mut self.params
    }

    pub fn scaler(&self) -> &ScalerParams {
        &self.scaler
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.specs.iter().map(param_count).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params.iter().flat_map(|l| l.values().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                params: self.param_count(),
                grads: flat.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.params {
            let dst = layer.values_mut();
            dst.copy_from_slice(&flat[offset..offset + dst.len()]);
            offset += dst.len();
        }
        Ok(())
    }
}

/// Builds a model with Glorot-uniform weights, zero biases and a forget-gate
/// bias of 1.
///
/// Draw order is layer by layer; inside an LSTM layer the four `W` matrices
/// (gates `i, f, c~, o`) come first, then the four `U` matrices, each
/// row-major. `W` uses limit `sqrt(6 / (input_dim + units))`, `U` uses
/// `sqrt(6 / (2 * units))`. The dense weight uses `sqrt(6 / (input_dim + units))`.
pub fn init_model(specs: &[LayerSpec], scaler: ScalerParams, lookback: usize, seed: u64) -> Result<Model> {
    validate_chain(specs)?;
    let mut rng = Rng::new(seed);
    let params = specs
        .iter()
        .map(|spec| {
            let mut layer = LayerParams::zeros(spec);
            match &mut layer {
                LayerParams::Lstm(p) => {
                    let (m, n) = (p.input_dim, p.units);
                    let w_limit = libm::sqrt(6.0 / (m + n) as f64);
                    let u_limit = libm::sqrt(6.0 / (2 * n) as f64);
                    let (w, rest) = p.values.split_at_mut(4 * n * m);
                    let (u, _) = rest.split_at_mut(4 * n * n);
                    w.iter_mut().for_each(|x| *x = rng.symmetric(w_limit));
                    u.iter_mut().for_each(|x| *x = rng.symmetric(u_limit));
                    for row in 0..n {
                        p.set_b(Gate::Forget, row, 1.0);
                    }
                }
                LayerParams::Dense(p) => {
                    let limit = libm::sqrt(6.0 / (p.input_dim + p.units) as f64);
                    let n = p.input_dim * p.units;
                    p.values[..n].iter_mut().for_each(|x| *x = rng.symmetric(limit));
                }
            }
            layer
        })
        .collect();
    let model = Model::from_parts(specs.to_vec(), params, scaler, lookback, seed)?;
    debug_assert_eq!(model.flat_params().len(), model.param_count());
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::FitScope;

    pub(crate) fn unit_scaler() -> ScalerParams {
        ScalerParams::new(0.0, 1.0, FitScope::TrainOnly).unwrap()
    }

    #[test]
    fn table_param_counts() {
        let stack = LayerSpec::default_stack();
        let counts: Vec<usize> = stack.iter().map(param_count).collect();
        assert_eq!(counts, vec![96, 24, 2]);
        assert_eq!(counts.iter().sum::<usize>(), 122);
        assert_eq!(param_count(&LayerSpec::lstm(1, 1, false)), 12);
    }

    #[test]
    fn init_is_deterministic_and_sized() {
        let stack = LayerSpec::default_stack();
        let a = init_model(&stack, unit_scaler(), 1, 42).unwrap();
        let b = init_model(&stack, unit_scaler(), 1, 42).unwrap();
        let c = init_model(&stack, unit_scaler(), 1, 43).unwrap();
        assert_eq!(a.param_count(), 122);
        let bits = |m: &Model| m.flat_params().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn init_follows_documented_draw_order() {
        let stack = LayerSpec::default_stack();
        let model = init_model(&stack, unit_scaler(), 1, 5).unwrap();
        let mut rng = Rng::new(5);
        let LayerParams::Lstm(first) = &model.params()[0] else {
            panic!("expected lstm")
        };
        let w_limit = libm::sqrt(6.0 / 5.0);
        let u_limit = libm::sqrt(6.0 / 8.0);
        for gate in Gate::ALL {
            for row in 0..4 {
                assert_eq!(first.w(gate, row, 0), rng.symmetric(w_limit));
            }
        }
        for gate in Gate::ALL {
            for row in 0..4 {
                for col in 0..4 {
                    assert_eq!(first.u(gate, row, col), rng.symmetric(u_limit));
                }
            }
        }
        for gate in Gate::ALL {
            for row in 0..4 {
                let expected = if gate == Gate::Forget { 1.0 } else { 0.0 };
                assert_eq!(first.b(gate, row), expected);
            }
        }
        let LayerParams::Dense(head) = &model.params()[2] else {
            panic!("expected dense")
        };
        assert_eq!(head.bias(0), 0.0);
        assert!(head.weight(0, 0).abs() <= libm::sqrt(3.0));
    }

    #[test]
    fn bad_chains_are_rejected() {
        let cases = [
            vec![],
            vec![LayerSpec::dense(1, 1)],
            vec![LayerSpec::lstm(1, 4, false), LayerSpec::dense(4, 2)],
            vec![
                LayerSpec::lstm(1, 4, true),
                LayerSpec::lstm(3, 1, false),
                LayerSpec::dense(1, 1),
            ],
            vec![
                LayerSpec::lstm(1, 4, false),
                LayerSpec::lstm(4, 1, false),
                LayerSpec::dense(1, 1),
            ],
            vec![LayerSpec::lstm(1, 4, true), LayerSpec::dense(4, 1)],
            vec![LayerSpec::lstm(2, 4, false), LayerSpec::dense(4, 1)],
        ];
        for specs in cases {
            assert!(
                matches!(init_model(&specs, unit_scaler(), 1, 0), Err(Error::BadChain(_))),
                "{specs:?}"
            );
        }
        assert!(init_model(
            &[LayerSpec::lstm(1, 3, false), LayerSpec::dense(3, 1)],
            unit_scaler(),
            2,
            0
        )
        .is_ok());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut model = init_model(&LayerSpec::default_stack(), unit_scaler(), 1, 9).unwrap();
        let flat: Vec<f64> = (0..122).map(|k| k as f64 * 0.5).collect();
        model.set_flat_params(&flat).unwrap();
        assert_eq!(model.flat_params(), flat);
        assert!(model.set_flat_params(&flat[..10]).is_err());
    }

    #[test]
    fn dense_head_is_affine() {
        let mut head = DenseParams::zeros(1, 1);
        head.set_weight(0, 0, 2.0);
        head.set_bias(0, 0.1);
        let out = head.apply(&[0.5]).unwrap();
        assert!((out[0] - 1.1).abs() < 1e-15);
        assert!(head.apply(&[0.5, 1.0]).is_err());
    }
}
