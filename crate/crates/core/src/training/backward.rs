use crate::corpus::{
    truncate_context, truncate_response, DialogSample, Label, Vocabulary,
};
use crate::encoder::{
    encode_sequence, softmax, Dropout, EncoderParams, LstmCellParams, LstmTrace, Mat,
};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

use super::losses::{binary_loss, selection_loss};
use super::Objective;

/// Gradients with the same shapes as [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub embedding: Mat,
    pub context_cell: LstmCellParams,
    pub response_cell: LstmCellParams,
}

impl GradientSet {
    pub fn zeros(params: &EncoderParams) -> Self {
        GradientSet {
            embedding: Mat::zeros(params.vocab_size, params.d_emb),
            context_cell: LstmCellParams::zeros(params.d_emb, params.d_hid),
            response_cell: LstmCellParams::zeros(params.d_emb, params.d_hid),
        }
    }

    pub fn slices(&self) -> [&[f64]; 7] {
        [
            &self.embedding.data,
            &self.context_cell.w_input.data,
            &self.context_cell.w_recurrent.data,
            &self.context_cell.bias,
            &self.response_cell.w_input.data,
            &self.response_cell.w_recurrent.data,
            &self.response_cell.bias,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 7] {
        [
            &mut self.embedding.data,
            &mut self.context_cell.w_input.data,
            &mut self.context_cell.w_recurrent.data,
            &mut self.context_cell.bias,
            &mut self.response_cell.w_input.data,
            &mut self.response_cell.w_recurrent.data,
            &mut self.response_cell.bias,
        ]
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            for v in s.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Parameter access in the same fixed slice order as [`GradientSet`].
pub fn param_slices_mut(params: &mut EncoderParams) -> [&mut [f64]; 7] {
    [
        &mut params.embedding.data,
        &mut params.context_cell.w_input.data,
        &mut params.context_cell.w_recurrent.data,
        &mut params.context_cell.bias,
        &mut params.response_cell.w_input.data,
        &mut params.response_cell.w_recurrent.data,
        &mut params.response_cell.bias,
    ]
}

/// Backpropagate through one encoded sequence.
///
/// `d_out` is the loss gradient at the (post-mask) encoder output.
/// Accumulates into the cell gradient and the embedding rows the sequence
/// touched.
fn bptt(
    params: &EncoderParams,
    cell: &LstmCellParams,
    trace: &LstmTrace,
    d_out: &[f64],
    g_cell: &mut LstmCellParams,
    g_emb: &mut Mat,
) {
    let h_dim = params.d_hid;
    let steps = trace.row_ids.len();
    if steps == 0 {
        return;
    }

    // Gradient at the raw final hidden state.
    let mut dh: Vec<f64> = match &trace.mask {
        Some(m) => d_out.iter().zip(m).map(|(d, s)| d * s).collect(),
        None => d_out.to_vec(),
    };
    let mut dc = vec![0.0; h_dim];
    let mut dpre = vec![0.0; 4 * h_dim];
    let zeros = vec![0.0; h_dim];

    for t in (0..steps).rev() {
        let gates = &trace.gates[t];
        let tanh_c = &trace.tanh_cell[t];
        let c_prev = if t > 0 { &trace.cell[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &trace.hidden[t - 1] } else { &zeros };

        for j in 0..h_dim {
            let i_g = gates[j];
            let f_g = gates[h_dim + j];
            let g = gates[2 * h_dim + j];
            let o_g = gates[3 * h_dim + j];
            let dcj = dc[j] + dh[j] * o_g * (1.0 - tanh_c[j] * tanh_c[j]);
            let d_o = dh[j] * tanh_c[j];
            dpre[j] = dcj * g * i_g * (1.0 - i_g);
            dpre[h_dim + j] = dcj * c_prev[j] * f_g * (1.0 - f_g);
            dpre[2 * h_dim + j] = dcj * i_g * (1.0 - g * g);
            dpre[3 * h_dim + j] = d_o * o_g * (1.0 - o_g);
            dc[j] = dcj * f_g;
        }

        let x = params.embedding.row(trace.row_ids[t] as usize);
        let d_x = g_emb.row_mut(trace.row_ids[t] as usize);
        for j in 0..h_dim {
            dh[j] = 0.0;
        }
        for k in 0..4 * h_dim {
            let dp = dpre[k];
            if dp == 0.0 {
                continue;
            }
            let wi = g_cell.w_input.row_mut(k);
            for (e, &xv) in x.iter().enumerate() {
                wi[e] += dp * xv;
            }
            let wr = g_cell.w_recurrent.row_mut(k);
            for (u, &hv) in h_prev.iter().enumerate() {
                wr[u] += dp * hv;
            }
            g_cell.bias[k] += dp;
            let wi_row = cell.w_input.row(k);
            for (e, dxe) in d_x.iter_mut().enumerate() {
                *dxe += dp * wi_row[e];
            }
            let wr_row = cell.w_recurrent.row(k);
            for (u, dhu) in dh.iter_mut().enumerate() {
                *dhu += dp * wr_row[u];
            }
        }
    }
}

fn encode_traced(
    params: &EncoderParams,
    cell: &LstmCellParams,
    tokens: &[String],
    is_context: bool,
    vocab: &Vocabulary,
    mask: Option<&[f64]>,
) -> Result<(Vec<f64>, LstmTrace)> {
    let ids = if is_context {
        vocab.encode(truncate_context(tokens))
    } else {
        vocab.encode(truncate_response(tokens))
    };
    let (h, trace) = encode_sequence(params, cell, &ids, mask, true)?;
    Ok((h, trace.unwrap()))
}

/// Loss and exact gradients of the mean batch loss.
///
/// For the selection and dropout objectives every sample must carry a
/// ground-truth label over its candidate set. For the binary objective each
/// sample is a (context, single response) pair whose label encodes the
/// positive/negative bit. `dropout_seed` freezes the per-sample masks of
/// the dropout objective.
pub fn backward(
    params: &EncoderParams,
    vocab: &Vocabulary,
    batch: &[DialogSample],
    objective: Objective,
    dropout_keep: f64,
    dropout_seed: u64,
) -> Result<(f64, GradientSet)> {
    assert!(!batch.is_empty(), "empty batch");
    let mut grads = GradientSet::zeros(params);
    let mut total_loss = 0.0;
    let weight = 1.0 / batch.len() as f64;

    for (idx, sample) in batch.iter().enumerate() {
        match objective {
            Objective::Binary => {
                let label = match sample.label {
                    Label::GroundTruth(0) => 1.0,
                    Label::IsNota => 0.0,
                    Label::GroundTruth(_) => {
                        return Err(Error::InvalidArgument(
                            "binary objective expects single-candidate pairs".into(),
                        ))
                    }
                };
                let (c, ctx_trace) = encode_traced(
                    params,
                    &params.context_cell,
                    &sample.context,
                    true,
                    vocab,
                    None,
                )?;
                let (r, resp_trace) = encode_traced(
                    params,
                    &params.response_cell,
                    &sample.candidates[0],
                    false,
                    vocab,
                    None,
                )?;
                let logit: f64 = c.iter().zip(&r).map(|(a, b)| a * b).sum();
                total_loss += weight * binary_loss(logit, label);
                let dlogit = weight * (sigmoid(logit) - label);
                let d_c: Vec<f64> = r.iter().map(|v| dlogit * v).collect();
                let d_r: Vec<f64> = c.iter().map(|v| dlogit * v).collect();
                bptt(params, &params.context_cell, &ctx_trace, &d_c, &mut grads.context_cell, &mut grads.embedding);
                bptt(params, &params.response_cell, &resp_trace, &d_r, &mut grads.response_cell, &mut grads.embedding);
            }
            Objective::Selection | Objective::Dropout => {
                let truth = sample.truth_index().ok_or(Error::MissingGroundTruth { index: idx })?;
                let dropout = match objective {
                    Objective::Dropout => Dropout::On {
                        keep: dropout_keep,
                        seed: derive_seed(dropout_seed, &format!("sample-{idx}")),
                    },
                    _ => Dropout::Off,
                };
                let ctx_mask = dropout.mask("dropout-context", params.d_hid);
                let resp_mask = dropout.mask("dropout-response", params.d_hid);
                let (c, ctx_trace) = encode_traced(
                    params,
                    &params.context_cell,
                    &sample.context,
                    true,
                    vocab,
                    ctx_mask.as_deref(),
                )?;
                let mut resp_vecs = Vec::with_capacity(sample.candidates.len());
                let mut resp_traces = Vec::with_capacity(sample.candidates.len());
                let mut logits = Vec::with_capacity(sample.candidates.len());
                for cand in &sample.candidates {
                    let (r, tr) = encode_traced(
                        params,
                        &params.response_cell,
                        cand,
                        false,
                        vocab,
                        resp_mask.as_deref(),
                    )?;
                    logits.push(c.iter().zip(&r).map(|(a, b)| a * b).sum());
                    resp_vecs.push(r);
                    resp_traces.push(tr);
                }
                total_loss += weight * selection_loss(&logits, truth);
                let probs = softmax(&logits);
                let mut d_c = vec![0.0; params.d_hid];
                for (i, (r, tr)) in resp_vecs.iter().zip(&resp_traces).enumerate() {
                    let dlogit = weight * (probs[i] - if i == truth { 1.0 } else { 0.0 });
                    for (dcj, rv) in d_c.iter_mut().zip(r) {
                        *dcj += dlogit * rv;
                    }
                    let d_r: Vec<f64> = c.iter().map(|v| dlogit * v).collect();
                    bptt(params, &params.response_cell, tr, &d_r, &mut grads.response_cell, &mut grads.embedding);
                }
                bptt(params, &params.context_cell, &ctx_trace, &d_c, &mut grads.context_cell, &mut grads.embedding);
            }
        }
    }

    if !total_loss.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite {
            context: "backward pass".into(),
            epoch: 0,
            batch: 0,
        });
    }
    Ok((total_loss, grads))
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

/// Mean batch loss alone, used by the finite-difference oracle in tests.
pub fn batch_loss(
    params: &EncoderParams,
    vocab: &Vocabulary,
    batch: &[DialogSample],
    objective: Objective,
    dropout_keep: f64,
    dropout_seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    let weight = 1.0 / batch.len() as f64;
    for (idx, sample) in batch.iter().enumerate() {
        match objective {
            Objective::Binary => {
                let label = match sample.label {
                    Label::GroundTruth(0) => 1.0,
                    _ => 0.0,
                };
                let ids_c = vocab.encode(truncate_context(&sample.context));
                let (c, _) = encode_sequence(params, &params.context_cell, &ids_c, None, false)?;
                let ids_r = vocab.encode(truncate_response(&sample.candidates[0]));
                let (r, _) = encode_sequence(params, &params.response_cell, &ids_r, None, false)?;
                let logit: f64 = c.iter().zip(&r).map(|(a, b)| a * b).sum();
                total += weight * binary_loss(logit, label);
            }
            Objective::Selection | Objective::Dropout => {
                let truth = sample.truth_index().ok_or(Error::MissingGroundTruth { index: idx })?;
                let dropout = match objective {
                    Objective::Dropout => Dropout::On {
                        keep: dropout_keep,
                        seed: derive_seed(dropout_seed, &format!("sample-{idx}")),
                    },
                    _ => Dropout::Off,
                };
                let ctx_mask = dropout.mask("dropout-context", params.d_hid);
                let resp_mask = dropout.mask("dropout-response", params.d_hid);
                let ids_c = vocab.encode(truncate_context(&sample.context));
                let (c, _) = encode_sequence(
                    params,
                    &params.context_cell,
                    &ids_c,
                    ctx_mask.as_deref(),
                    false,
                )?;
                let mut logits = Vec::with_capacity(sample.candidates.len());
                for cand in &sample.candidates {
                    let ids_r = vocab.encode(truncate_response(cand));
                    let (r, _) = encode_sequence(
                        params,
                        &params.response_cell,
                        &ids_r,
                        resp_mask.as_deref(),
                        false,
                    )?;
                    logits.push(c.iter().zip(&r).map(|(a, b)| a * b).sum());
                }
                total += weight * selection_loss(&logits, truth);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    fn setup() -> (EncoderParams, Vocabulary) {
        let seqs: Vec<Vec<String>> = vec![crate::corpus::tokenize("a b c d e f g h")];
        let vocab = build_vocab(seqs.iter().map(|s| s.as_slice()), 100).unwrap();
        let params = EncoderParams::init(vocab.size(), 5, 6, 77);
        (params, vocab)
    }

    fn sample(ctx: &str, cands: &[&str], truth: usize) -> DialogSample {
        DialogSample {
            context: crate::corpus::tokenize(ctx),
            candidates: cands.iter().map(|c| crate::corpus::tokenize(c)).collect(),
            label: Label::GroundTruth(truth),
        }
    }

    #[test]
    fn duplicated_sample_doubles_contribution_before_averaging() {
        let (params, vocab) = setup();
        let s = sample("a b c", &["d e", "f g"], 0);
        let (_, g1) = backward(&params, &vocab, &[s.clone()], Objective::Selection, 1.0, 0).unwrap();
        let (_, g2) =
            backward(&params, &vocab, &[s.clone(), s], Objective::Selection, 1.0, 0).unwrap();
        // Mean over two identical samples equals the single-sample gradient.
        for (a, b) in g1.slices().iter().zip(g2.slices().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn saturated_batch_has_tiny_gradient() {
        let (mut params, vocab) = setup();
        // Scale parameters up so the correct candidate saturates the softmax.
        // Instead force it by a crafted sample: identical context/candidate
        // tokens give the truth a much higher score after scaling.
        for v in params.embedding.data.iter_mut() {
            *v *= 40.0;
        }
        let s = sample("a a a a", &["a a a", "b b b"], 0);
        let (loss, grads) = backward(&params, &vocab, &[s], Objective::Selection, 1.0, 0).unwrap();
        if loss < 1e-8 {
            assert!(grads.global_norm() < 1e-6);
        }
    }

    #[test]
    fn gradient_is_finite_and_nonzero() {
        let (params, vocab) = setup();
        let batch = vec![
            sample("a b c", &["d e", "f g"], 0),
            sample("c d", &["h a", "b c"], 1),
        ];
        let (loss, grads) = backward(&params, &vocab, &batch, Objective::Selection, 1.0, 0).unwrap();
        assert!(loss > 0.0);
        assert!(grads.is_finite());
        assert!(grads.global_norm() > 0.0);
    }
}
