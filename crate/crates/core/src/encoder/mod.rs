//! Dual single-layer unidirectional LSTM encoders with a dot-product match
//! score. One cell encodes the context, an independent cell encodes each
//! response; the shared embedding table feeds both.

mod checkpoint;
mod lstm;
mod mat;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use lstm::{encode_sequence, lstm_step_oracle, LstmCellParams, LstmTrace};
pub use mat::Mat;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    truncate_context, truncate_response, DialogSample, Vocabulary, NOTA_ID, UNK_ID,
};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// All trainable parameters: shared embedding plus two independent LSTM
/// cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub vocab_size: usize,
    pub d_emb: usize,
    pub d_hid: usize,
    /// [vocab_size x d_emb], row per token id.
    pub embedding: Mat,
    pub context_cell: LstmCellParams,
    pub response_cell: LstmCellParams,
    /// Whether `_NOTA` received training signal. When false, its embedding
    /// row is read as `_UNK` at inference.
    pub nota_trained: bool,
}

impl EncoderParams {
    /// Conventional init: embeddings U[-0.1, 0.1], cell weights
    /// U[-0.08, 0.08], forget-gate bias 1.0, other biases 0.
    pub fn init(vocab_size: usize, d_emb: usize, d_hid: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "encoder-init");
        let mut embedding = Mat::zeros(vocab_size, d_emb);
        for v in embedding.data.iter_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
        let context_cell = LstmCellParams::init(d_emb, d_hid, &mut rng);
        let response_cell = LstmCellParams::init(d_emb, d_hid, &mut rng);
        EncoderParams {
            vocab_size,
            d_emb,
            d_hid,
            embedding,
            context_cell,
            response_cell,
            nota_trained: false,
        }
    }

    /// Embedding row actually used for a token id, applying the
    /// `_NOTA` -> `_UNK` remap for models trained without `_NOTA`.
    pub fn embedding_row_id(&self, id: u32) -> Result<u32> {
        if id as usize >= self.vocab_size {
            return Err(Error::TokenOutOfRange {
                id,
                vocab: self.vocab_size,
            });
        }
        if id == NOTA_ID && !self.nota_trained {
            Ok(UNK_ID)
        } else {
            Ok(id)
        }
    }

    pub fn n_params(&self) -> usize {
        self.embedding.data.len()
            + self.context_cell.n_params()
            + self.response_cell.n_params()
    }
}

/// Dropout applied to each encoder's final hidden state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dropout {
    Off,
    /// Inverted dropout: kept units are scaled by 1/keep, so scores stay on
    /// the dropout-off scale.
    On { keep: f64, seed: u64 },
}

impl Dropout {
    /// Hidden-layer mask for the named encoder stream, entries 0 or 1/keep.
    pub fn mask(&self, stream: &str, d_hid: usize) -> Option<Vec<f64>> {
        match *self {
            Dropout::Off => None,
            Dropout::On { keep, seed } => {
                let mut rng = stream_rng(seed, stream);
                Some(
                    (0..d_hid)
                        .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
                        .collect(),
                )
            }
        }
    }
}

/// Per-candidate scores for one sample: raw dot-product logits and their
/// softmax, plus the `_NOTA` flag per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub is_nota: Vec<bool>,
}

impl ScoreVector {
    pub fn from_logits(logits: Vec<f64>, is_nota: Vec<bool>) -> Self {
        let probs = softmax(&logits);
        ScoreVector {
            logits,
            probs,
            is_nota,
        }
    }

    /// Argmax over logits, ties to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.logits)
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }
}

/// Index of the maximal value, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Dot-product match score f(r, c) = c . r.
pub fn score(context_vec: &[f64], response_vec: &[f64]) -> Result<f64> {
    if context_vec.len() != response_vec.len() {
        return Err(Error::DimensionMismatch(format!(
            "context dim {} vs response dim {}",
            context_vec.len(),
            response_vec.len()
        )));
    }
    Ok(context_vec
        .iter()
        .zip(response_vec)
        .map(|(a, b)| a * b)
        .sum())
}

/// Encode a context sequence (truncated, trace-free).
pub fn encode_context(
    params: &EncoderParams,
    tokens: &[String],
    vocab: &Vocabulary,
    mask: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let ids = vocab.encode(truncate_context(tokens));
    let (h, _) = encode_sequence(params, &params.context_cell, &ids, mask, false)?;
    Ok(h)
}

/// Encode a response sequence (truncated, trace-free).
pub fn encode_response(
    params: &EncoderParams,
    tokens: &[String],
    vocab: &Vocabulary,
    mask: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let ids = vocab.encode(truncate_response(tokens));
    let (h, _) = encode_sequence(params, &params.response_cell, &ids, mask, false)?;
    Ok(h)
}

/// Score every candidate of a sample against its context.
///
/// The context is encoded once; with dropout on, one context mask and one
/// response mask (shared across candidates) are derived from the seed.
pub fn forward_sample(
    params: &EncoderParams,
    sample: &DialogSample,
    vocab: &Vocabulary,
    dropout: Dropout,
) -> Result<ScoreVector> {
    assert!(!sample.candidates.is_empty(), "sample has no candidates");
    let ctx_mask = dropout.mask("dropout-context", params.d_hid);
    let resp_mask = dropout.mask("dropout-response", params.d_hid);
    let c = encode_context(params, &sample.context, vocab, ctx_mask.as_deref())?;
    let mut logits = Vec::with_capacity(sample.candidates.len());
    let mut is_nota = Vec::with_capacity(sample.candidates.len());
    for (i, cand) in sample.candidates.iter().enumerate() {
        let r = encode_response(params, cand, vocab, resp_mask.as_deref())?;
        logits.push(score(&c, &r)?);
        is_nota.push(sample.is_nota_candidate(i));
    }
    Ok(ScoreVector::from_logits(logits, is_nota))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, Label};

    fn tiny_vocab() -> Vocabulary {
        let seqs: Vec<Vec<String>> = vec![crate::corpus::tokenize("a b c d e f g h")];
        build_vocab(seqs.iter().map(|s| s.as_slice()), 100).unwrap()
    }

    fn sample(ctx: &str, cands: &[&str], truth: usize) -> DialogSample {
        DialogSample {
            context: crate::corpus::tokenize(ctx),
            candidates: cands.iter().map(|c| crate::corpus::tokenize(c)).collect(),
            label: Label::GroundTruth(truth),
        }
    }

    #[test]
    fn score_is_exact_dot_product() {
        assert_eq!(score(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(score(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert!(score(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn score_matches_kahan_oracle() {
        let mut rng = stream_rng(3, "score-oracle");
        for _ in 0..50 {
            let n = 512;
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // Kahan compensated summation.
            let (mut sum, mut comp) = (0.0f64, 0.0f64);
            for i in 0..n {
                let y = c[i] * r[i] - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
            let norm_c: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let norm_r: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            let got = score(&c, &r).unwrap();
            assert!((got - sum).abs() <= 1e-10 * norm_c * norm_r);
        }
    }

    #[test]
    fn zero_params_give_zero_hidden_state() {
        let vocab = tiny_vocab();
        let mut params = EncoderParams::init(vocab.size(), 4, 6, 1);
        params.embedding = Mat::zeros(vocab.size(), 4);
        params.context_cell = LstmCellParams::zeros(4, 6);
        params.response_cell = LstmCellParams::zeros(4, 6);
        let h = encode_context(&params, &crate::corpus::tokenize("a b c"), &vocab, None).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encoding_is_deterministic() {
        let vocab = tiny_vocab();
        let params = EncoderParams::init(vocab.size(), 8, 12, 5);
        let toks = crate::corpus::tokenize("a b c d");
        let h1 = encode_context(&params, &toks, &vocab, None).unwrap();
        let h2 = encode_context(&params, &toks, &vocab, None).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn identical_candidates_score_uniformly() {
        let vocab = tiny_vocab();
        let params = EncoderParams::init(vocab.size(), 8, 12, 5);
        let s = sample("a b", &["c d", "c d", "c d"], 0);
        let sv = forward_sample(&params, &s, &vocab, Dropout::Off).unwrap();
        for &p in &sv.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariance_and_closed_form() {
        let probs = softmax(&[0.0, 3f64.ln()]);
        assert!((probs[0] - 0.25).abs() < 1e-12);
        assert!((probs[1] - 0.75).abs() < 1e-12);
        let a = softmax(&[1.0, 2.0, 3.0]);
        let b = softmax(&[101.0, 102.0, 103.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let sum: f64 = a.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn argmax_agrees_between_logits_and_probs() {
        let mut rng = stream_rng(9, "argmax");
        for _ in 0..200 {
            let logits: Vec<f64> = (0..7).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let sv = ScoreVector::from_logits(logits, vec![false; 7]);
            assert_eq!(sv.argmax(), argmax(&sv.probs));
        }
    }

    #[test]
    fn dropout_seeding_contract() {
        let vocab = tiny_vocab();
        let params = EncoderParams::init(vocab.size(), 8, 32, 5);
        let s = sample("a b c", &["d e", "f g"], 0);
        let off1 = forward_sample(&params, &s, &vocab, Dropout::Off).unwrap();
        let off2 = forward_sample(&params, &s, &vocab, Dropout::Off).unwrap();
        assert_eq!(off1, off2);
        let on = |seed| {
            forward_sample(&params, &s, &vocab, Dropout::On { keep: 0.5, seed }).unwrap()
        };
        assert_eq!(on(1), on(1));
        assert_ne!(on(1).logits, on(2).logits);
    }

    #[test]
    fn candidate_permutation_permutes_logits() {
        let vocab = tiny_vocab();
        let params = EncoderParams::init(vocab.size(), 8, 12, 5);
        let s = sample("a b c", &["d e", "f g", "h a"], 1);
        let mut permuted = s.clone();
        permuted.candidates.rotate_left(1);
        permuted.label = Label::GroundTruth(0);
        let sv = forward_sample(&params, &s, &vocab, Dropout::Off).unwrap();
        let sp = forward_sample(&params, &permuted, &vocab, Dropout::Off).unwrap();
        assert_eq!(sp.logits[0], sv.logits[1]);
        assert_eq!(sp.logits[1], sv.logits[2]);
        assert_eq!(sp.logits[2], sv.logits[0]);
    }

    #[test]
    fn out_of_range_token_id_errors() {
        let vocab = tiny_vocab();
        let params = EncoderParams::init(3, 4, 6, 1); // vocab smaller than ids
        let toks = crate::corpus::tokenize("h");
        assert!(matches!(
            encode_context(&params, &toks, &vocab, None),
            Err(Error::TokenOutOfRange { .. })
        ));
    }

    use rand::Rng;
    use crate::rng::stream_rng;
}
