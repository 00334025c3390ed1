use alloc::vec;
use alloc::vec::Vec;

use super::cell::{cell_forward, CellStep};
use super::{Gate, Gradients, LayerParams, LstmParams, Model};
use crate::{Error, Result};

/// Hidden and cell state of every LSTM layer, `(h, c)` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl RecurrentState {
    pub fn zeros(model: &Model) -> Self {
        Self {
            layers: model
                .params()
                .iter()
                .filter_map(|p| match p {
                    LayerParams::Lstm(l) => Some((vec![0.0; l.units()], vec![0.0; l.units()])),
                    LayerParams::Dense(_) => None,
                })
                .collect(),
        }
    }
}

/// Per-layer, per-timestep record of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// `steps[layer][t]` for each LSTM layer, bottom to top.
    pub steps: Vec<Vec<CellStep>>,
    pub head_input: Vec<f64>,
    pub prediction: f64,
}

impl ForwardCache {
    pub fn final_state(&self) -> RecurrentState {
        RecurrentState {
            layers: self
                .steps
                .iter()
                .map(|layer| {
                    let last = layer.last().expect("non-empty window");
                    (last.h.clone(), last.c.clone())
                })
                .collect(),
        }
    }
}

impl Model {
    /// Stateless forward pass: every LSTM layer starts from zero state.
    pub fn forward(&self, window: &[f64]) -> Result<(f64, ForwardCache)> {
        self.forward_from(window, None)
    }

    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        self.forward(window).map(|(p, _)| p)
    }

    /// Forward pass starting from `initial` (zeros when `None`).
    pub fn forward_from(&self, window: &[f64], initial: Option<&RecurrentState>) -> Result<(f64, ForwardCache)> {
        if window.len() != self.lookback() {
            return Err(Error::DimensionMismatch {
                expected: self.lookback(),
                got: window.len(),
            });
        }
        let zeros;
        let initial = match initial {
            Some(s) => s,
            None => {
                zeros = RecurrentState::zeros(self);
                &zeros
            }
        };

        let mut sequence: Vec<Vec<f64>> = window.iter().map(|&x| vec![x]).collect();
        let mut steps = Vec::new();
        let mut head_input = Vec::new();
        let mut lstm_index = 0;
        let mut prediction = 0.0;

        for (spec, params) in self.specs().iter().zip(self.params()) {
            match params {
                LayerParams::Lstm(p) => {
                    let (h0, c0) = initial.layers.get(lstm_index).ok_or(Error::StaleCache)?;
                    let mut h = h0.clone();
                    let mut c = c0.clone();
                    let mut layer_steps = Vec::with_capacity(sequence.len());
                    for x in &sequence {
                        let step = cell_forward(x, &h, &c, p)?;
                        h.clone_from(&step.h);
                        c.clone_from(&step.c);
                        layer_steps.push(step);
                    }
                    sequence = if spec.returns_sequence {
                        layer_steps.iter().map(|s| s.h.clone()).collect()
                    } else {
                        vec![h]
                    };
                    steps.push(layer_steps);
                    lstm_index += 1;
                }
                LayerParams::Dense(p) => {
                    head_input = sequence.pop().ok_or(Error::Empty)?;
                    prediction = p.apply(&head_input)?[0];
                }
            }
        }

        Ok((
            prediction,
            ForwardCache {
                steps,
                head_input,
                prediction,
            },
        ))
    }

    /// Reverse-mode gradient of a loss with `dL/dprediction = d_pred`,
    /// accumulated over every timestep of the window.
    pub fn backward(&self, cache: &ForwardCache, d_pred: f64) -> Result<Gradients> {
        self.check_cache(cache)?;
        let mut grads = Gradients::zeros_like(self);
        let timesteps = self.lookback();

        let head_index = self.params().len() - 1;
        let LayerParams::Dense(head) = &self.params()[head_index] else {
            return Err(Error::StaleCache);
        };
        let LayerParams::Dense(d_head) = &mut grads.layers[head_index] else {
            unreachable!()
        };
        let mut d_top = vec![0.0; head.input_dim()];
        for (col, &h) in cache.head_input.iter().enumerate() {
            d_head.set_weight(0, col, d_pred * h);
            d_top[col] = head.weight(0, col) * d_pred;
        }
        d_head.set_bias(0, d_pred);

        // Gradient w.r.t. each LSTM layer's per-timestep output. The topmost
        // LSTM only emits its last state.
        let mut d_outputs: Vec<Vec<f64>> = vec![vec![0.0; d_top.len()]; timesteps];
        d_outputs[timesteps - 1] = d_top;

        for layer in (0..head_index).rev() {
            let LayerParams::Lstm(p) = &self.params()[layer] else {
                return Err(Error::StaleCache);
            };
            let LayerParams::Lstm(g) = &mut grads.layers[layer] else {
                unreachable!()
            };
            d_outputs = lstm_backward(p, &cache.steps[layer], &d_outputs, g);
        }
        Ok(grads)
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let lstm_layers: Vec<&LstmParams> = self
            .params()
            .iter()
            .filter_map(|p| match p {
                LayerParams::Lstm(l) => Some(l),
                LayerParams::Dense(_) => None,
            })
            .collect();
        if cache.steps.len() != lstm_layers.len() {
            return Err(Error::StaleCache);
        }
        for (steps, p) in cache.steps.iter().zip(&lstm_layers) {
            if steps.len() != self.lookback() {
                return Err(Error::StaleCache);
            }
            if steps
                .iter()
                .any(|s| s.x.len() != p.input_dim() || s.h.len() != p.units())
            {
                return Err(Error::StaleCache);
            }
        }
        let head_in = lstm_layers.last().map_or(0, |p| p.units());
        if cache.head_input.len() != head_in {
            return Err(Error::StaleCache);
        }
        Ok(())
    }
}

/// Backpropagation through time for one layer. `d_outputs[t]` is the
/// gradient arriving at `h_t` from above; returns the gradient w.r.t. each
/// timestep's input and accumulates parameter gradients into `grads`.
fn lstm_backward(p: &LstmParams, steps: &[CellStep], d_outputs: &[Vec<f64>], grads: &mut LstmParams) -> Vec<Vec<f64>> {
    let (m, n) = (p.input_dim(), p.units());
    let mut d_inputs = vec![vec![0.0; m]; steps.len()];
    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    let mut da = vec![0.0; 4 * n];

    for (t, step) in steps.iter().enumerate().rev() {
        for row in 0..n {
            let dh = d_outputs[t][row] + dh_next[row];
            let i = step.gate(Gate::Input, n, row);
            let f = step.gate(Gate::Forget, n, row);
            let g = step.gate(Gate::Candidate, n, row);
            let o = step.gate(Gate::Output, n, row);
            let tc = step.tanh_c[row];

            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[row];
            da[Gate::Input as usize * n + row] = dc * g * i * (1.0 - i);
            da[Gate::Forget as usize * n + row] = dc * step.c_prev[row] * f * (1.0 - f);
            da[Gate::Candidate as usize * n + row] = dc * i * (1.0 - g * g);
            da[Gate::Output as usize * n + row] = d_o * o * (1.0 - o);
            dc_next[row] = dc * f;
        }

        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for gate in Gate::ALL {
            for row in 0..n {
                let a = da[gate as usize * n + row];
                let k = grads.b_index(gate, row);
                grads.values[k] += a;
                for col in 0..m {
                    let k = grads.w_index(gate, row, col);
                    grads.values[k] += a * step.x[col];
                    d_inputs[t][col] += p.w(gate, row, col) * a;
                }
                for col in 0..n {
                    let k = grads.u_index(gate, row, col);
                    grads.values[k] += a * step.h_prev[col];
                    dh_next[col] += p.u(gate, row, col) * a;
                }
            }
        }
    }
    d_inputs
}
