use alloc::vec;
use alloc::vec::Vec;

use super::{Gate, LstmParams};
use crate::{Error, Result};

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Everything one timestep of one layer produces, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Gate pre-activations, `4 * units`, gate-major (`i, f, c~, o`).
    pub pre: Vec<f64>,
    /// Gate activations in the same layout.
    pub act: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl CellStep {
    #[inline]
    pub fn gate(&self, gate: Gate, units: usize, row: usize) -> f64 {
        self.act[gate as usize * units + row]
    }
}

/// One LSTM step:
///
/// ```text
/// i  = sigma(W_i x + U_i h + b_i)      f = sigma(W_f x + U_f h + b_f)
/// o  = sigma(W_o x + U_o h + b_o)      c~ = tanh(W_c x + U_c h + b_c)
/// c' = f * c + i * c~                   h' = o * tanh(c')
/// ```
pub fn cell_forward(x: &[f64], h_prev: &[f64], c_prev: &[f64], params: &LstmParams) -> Result<CellStep> {
    let (m, n) = (params.input_dim(), params.units());
    for (expected, got) in [(m, x.len()), (n, h_prev.len()), (n, c_prev.len())] {
        if expected != got {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }

    let mut pre = vec![0.0; 4 * n];
    for gate in Gate::ALL {
        for row in 0..n {
            let mut z = params.b(gate, row);
            for (col, &xc) in x.iter().enumerate() {
                z += params.w(gate, row, col) * xc;
            }
            for (col, &hc) in h_prev.iter().enumerate() {
                z += params.u(gate, row, col) * hc;
            }
            pre[gate as usize * n + row] = z;
        }
    }

    let act: Vec<f64> = pre
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            if k / n == Gate::Candidate as usize {
                libm::tanh(z)
            } else {
                sigmoid(z)
            }
        })
        .collect();

    let mut c = vec![0.0; n];
    let mut tanh_c = vec![0.0; n];
    let mut h = vec![0.0; n];
    for row in 0..n {
        let i = act[Gate::Input as usize * n + row];
        let f = act[Gate::Forget as usize * n + row];
        let g = act[Gate::Candidate as usize * n + row];
        let o = act[Gate::Output as usize * n + row];
        debug_assert!((0.0..=1.0).contains(&i) && (0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&o));
        debug_assert!((-1.0..=1.0).contains(&g));
        c[row] = f * c_prev[row] + i * g;
        tanh_c[row] = libm::tanh(c[row]);
        debug_assert!((-1.0..=1.0).contains(&tanh_c[row]));
        h[row] = o * tanh_c[row];
    }

    Ok(CellStep {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        pre,
        act,
        c,
        tanh_c,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let step = cell_forward(&[0.3, -1.0, 7.0], &[0.0; 2], &[0.0; 2], &p).unwrap();
        assert_eq!(step.h, vec![0.0, 0.0]);
        assert_eq!(step.c, vec![0.0, 0.0]);
        assert!(step.act[..2].iter().all(|&a| a == 0.5));
    }

    #[test]
    fn scalar_cell_reference_values() {
        // Frozen from an independent scalar evaluation of the four gates.
        let mut p = LstmParams::zeros(1, 1);
        for gate in Gate::ALL {
            p.set_w(gate, 0, 0, 1.0);
        }
        let step = cell_forward(&[1.0], &[0.0], &[0.0], &p).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        for gate in [Gate::Input, Gate::Forget, Gate::Output] {
            assert!(close(step.gate(gate, 1, 0), 0.7310585786300049));
        }
        assert!(close(step.gate(Gate::Candidate, 1, 0), 0.7615941559557649));
        assert!(close(step.c[0], 0.5567699411459397));
        assert!(close(step.h[0], 0.36960635293570576));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell_state() {
        let mut p = LstmParams::zeros(1, 1);
        p.set_b(Gate::Forget, 0, 20.0);
        let step = cell_forward(&[0.0], &[0.0], &[0.8], &p).unwrap();
        assert!((step.c[0] - 0.8).abs() < 1e-8);
    }

    #[test]
    fn dimension_mismatch() {
        let p = LstmParams::zeros(2, 3);
        assert_eq!(
            cell_forward(&[1.0], &[0.0; 3], &[0.0; 3], &p),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        );
        assert!(cell_forward(&[1.0, 2.0], &[0.0; 2], &[0.0; 3], &p).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
