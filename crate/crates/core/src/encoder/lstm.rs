use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mat::{dot, Mat};
use super::EncoderParams;
use crate::error::Result;

/// Parameters of one LSTM cell. Gate blocks are stacked in the order
/// input, forget, cell, output: `w_input` is [4H x E], `w_recurrent` is
/// [4H x H], `bias` is [4H].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub w_input: Mat,
    pub w_recurrent: Mat,
    pub bias: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(d_emb: usize, d_hid: usize) -> Self {
        LstmCellParams {
            w_input: Mat::zeros(4 * d_hid, d_emb),
            w_recurrent: Mat::zeros(4 * d_hid, d_hid),
            bias: vec![0.0; 4 * d_hid],
        }
    }

    /// Uniform [-0.08, 0.08] weights, forget-gate bias 1.0.
    pub fn init(d_emb: usize, d_hid: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut cell = Self::zeros(d_emb, d_hid);
        for v in cell.w_input.data.iter_mut() {
            *v = rng.gen_range(-0.08..0.08);
        }
        for v in cell.w_recurrent.data.iter_mut() {
            *v = rng.gen_range(-0.08..0.08);
        }
        for b in cell.bias[d_hid..2 * d_hid].iter_mut() {
            *b = 1.0;
        }
        cell
    }

    pub fn n_params(&self) -> usize {
        self.w_input.data.len() + self.w_recurrent.data.len() + self.bias.len()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cached activations of one encoded sequence, kept for backpropagation
/// through time.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// Effective embedding-row ids after the `_NOTA` remap.
    pub row_ids: Vec<u32>,
    /// Per step, post-activation gates [i f g o], length 4H.
    pub gates: Vec<Vec<f64>>,
    /// Per step, cell state c_t.
    pub cell: Vec<Vec<f64>>,
    /// Per step, tanh(c_t).
    pub tanh_cell: Vec<Vec<f64>>,
    /// Per step, hidden state h_t (pre-mask).
    pub hidden: Vec<Vec<f64>>,
    /// Dropout mask applied to the final hidden state, if any.
    pub mask: Option<Vec<f64>>,
}

/// Run a cell left-to-right over token ids; returns the final hidden state
/// after the optional dropout mask, and the activation trace when requested.
///
/// An empty sequence yields the zero initial state.
pub fn encode_sequence(
    params: &EncoderParams,
    cell: &LstmCellParams,
    ids: &[u32],
    mask: Option<&[f64]>,
    want_trace: bool,
) -> Result<(Vec<f64>, Option<LstmTrace>)> {
    let h_dim = params.d_hid;
    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    let mut trace = want_trace.then(|| LstmTrace {
        row_ids: Vec::with_capacity(ids.len()),
        gates: Vec::with_capacity(ids.len()),
        cell: Vec::with_capacity(ids.len()),
        tanh_cell: Vec::with_capacity(ids.len()),
        hidden: Vec::with_capacity(ids.len()),
        mask: mask.map(|m| m.to_vec()),
    });

    let mut pre = vec![0.0; 4 * h_dim];
    for &id in ids {
        let row_id = params.embedding_row_id(id)?;
        let x = params.embedding.row(row_id as usize);
        for k in 0..4 * h_dim {
            pre[k] = cell.bias[k] + dot(cell.w_input.row(k), x) + dot(cell.w_recurrent.row(k), &h);
        }
        let mut gates = vec![0.0; 4 * h_dim];
        for j in 0..h_dim {
            gates[j] = sigmoid(pre[j]); // input gate
            gates[h_dim + j] = sigmoid(pre[h_dim + j]); // forget gate
            gates[2 * h_dim + j] = pre[2 * h_dim + j].tanh(); // cell candidate
            gates[3 * h_dim + j] = sigmoid(pre[3 * h_dim + j]); // output gate
        }
        let mut tanh_c = vec![0.0; h_dim];
        for j in 0..h_dim {
            c[j] = gates[h_dim + j] * c[j] + gates[j] * gates[2 * h_dim + j];
            tanh_c[j] = c[j].tanh();
            h[j] = gates[3 * h_dim + j] * tanh_c[j];
        }
        if let Some(t) = trace.as_mut() {
            t.row_ids.push(row_id);
            t.gates.push(gates);
            t.cell.push(c.clone());
            t.tanh_cell.push(tanh_c);
            t.hidden.push(h.clone());
        }
    }

    let out = match mask {
        Some(m) => h.iter().zip(m).map(|(v, s)| v * s).collect(),
        None => h,
    };
    Ok((out, trace))
}

/// Independent single-step LSTM oracle written directly from the gate
/// formulas, used to cross-check `encode_sequence` on one-token inputs.
pub fn lstm_step_oracle(
    cell: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let h_dim = h_prev.len();
    let pre_at = |block: usize, j: usize| -> f64 {
        let k = block * h_dim + j;
        let mut acc = cell.bias[k];
        for (e, &xv) in x.iter().enumerate() {
            acc += cell.w_input.data[k * cell.w_input.cols + e] * xv;
        }
        for (u, &hv) in h_prev.iter().enumerate() {
            acc += cell.w_recurrent.data[k * cell.w_recurrent.cols + u] * hv;
        }
        acc
    };
    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    for j in 0..h_dim {
        let i_g = 1.0 / (1.0 + (-pre_at(0, j)).exp());
        let f_g = 1.0 / (1.0 + (-pre_at(1, j)).exp());
        let g = pre_at(2, j).tanh();
        let o_g = 1.0 / (1.0 + (-pre_at(3, j)).exp());
        c[j] = f_g * c_prev[j] + i_g * g;
        h[j] = o_g * c[j].tanh();
    }
    (h, c)
}
