/// Negative log likelihood of the ground-truth candidate under the softmax
/// of the logits, computed with max subtraction.
pub fn selection_loss(logits: &[f64], truth_index: usize) -> f64 {
    assert!(truth_index < logits.len(), "truth index out of range");
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln() + m;
    log_sum - logits[truth_index]
}

/// Binary cross-entropy between `label` and sigmoid(logit), in the stable
/// log-sum-exp form.
pub fn binary_loss(logit: f64, label: f64) -> f64 {
    assert!(logit.is_finite(), "logit must be finite");
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}
