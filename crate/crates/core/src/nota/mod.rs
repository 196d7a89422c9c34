//! The four "none of the above" decision procedures: direct prediction with a
//! trained rejection candidate, max-score thresholding, a logistic-regression
//! meta classifier over candidate scores, and dropout score-variance.
//!
//! Every detector produces a [`Decision`] whose `confidence` is oriented so
//! that *higher means a ground truth is more likely present* (max score for
//! thresholding, the meta classifier probability, negative variance for
//! dropout, the winner-vs-rejection margin for direct prediction). Evaluation
//! code negates it when it needs a rejection-positive ranking.

mod logreg;

pub use logreg::{
    logreg_dropout_features, logreg_features, logreg_predict, logreg_predict_dropout,
    logreg_train, predict_probability, FeatureSpec, LogRegModel, LogRegTrainConfig, ScoreKind,
};

use serde::{Deserialize, Serialize};

use crate::corpus::{DialogSample, Vocabulary};
use crate::encoder::{forward_sample, Dropout, EncoderParams, ScoreVector};
use crate::{Error, Result};

/// Default rejection threshold on max logit.
pub const DEFAULT_LOGIT_THRESHOLD: f64 = 0.5;
/// Default rejection threshold on max softmax probability.
pub const DEFAULT_SOFTMAX_THRESHOLD: f64 = 0.55;
/// Default rejection threshold on logit variance under dropout.
pub const DEFAULT_LOGIT_VARIANCE_THRESHOLD: f64 = 0.1;
/// Default rejection threshold on softmax variance under dropout.
pub const DEFAULT_SOFTMAX_VARIANCE_THRESHOLD: f64 = 0.001;
/// Default number of stochastic forward passes for the dropout detector.
pub const DEFAULT_DROPOUT_PASSES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// No candidate is a plausible response.
    Nota,
    /// The candidate at this index is the predicted response.
    Candidate(usize),
}

impl Verdict {
    pub fn is_nota(self) -> bool {
        matches!(self, Verdict::Nota)
    }
}

/// Outcome of one detector on one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    /// Higher ⇒ the detector believes a ground truth is present.
    pub confidence: f64,
}

/// Argmax over all candidates of a model trained with an explicit rejection
/// candidate; the verdict is `Nota` iff that candidate wins outright.
///
/// Requires exactly one rejection candidate in the score vector.
pub fn direct_predict(sv: &ScoreVector) -> Result<Decision> {
    let nota_positions: Vec<usize> = sv
        .is_nota
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| f.then_some(i))
        .collect();
    let nota_idx = match nota_positions.as_slice() {
        [i] => *i,
        [] => return Err(Error::NoNotaCandidate),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "expected exactly one rejection candidate, found {}",
                nota_positions.len()
            )))
        }
    };
    let winner = sv.argmax();
    let best_other = sv
        .logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != nota_idx)
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = if winner == nota_idx {
        Verdict::Nota
    } else {
        Verdict::Candidate(winner)
    };
    Ok(Decision {
        verdict,
        confidence: best_other - sv.logits[nota_idx],
    })
}

/// Reject whenever the max score of the chosen kind falls strictly below θ.
///
/// This detector runs on data *without* a rejection candidate; scoring one is
/// a detector/data mismatch and an error.
pub fn threshold_predict(sv: &ScoreVector, theta: f64, kind: ScoreKind) -> Result<Decision> {
    if sv.is_nota.iter().any(|&f| f) {
        return Err(Error::UnexpectedNotaCandidate);
    }
    let scores = kind.select(sv);
    let winner = crate::encoder::argmax(scores);
    let max = scores[winner];
    let verdict = if max < theta {
        Verdict::Nota
    } else {
        Verdict::Candidate(winner)
    };
    Ok(Decision {
        verdict,
        confidence: max,
    })
}

/// Per-candidate score statistics over the stochastic passes of
/// [`dropout_predict`], in original candidate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutSummary {
    pub means: Vec<f64>,
    /// Population variances, matching `means` by index.
    pub variances: Vec<f64>,
}

/// Runs `n_passes` forward passes with distinct dropout masks, picks the
/// candidate by majority vote over per-pass argmaxes (ties → higher mean
/// score), and rejects when the winning candidate's score variance of the
/// chosen kind exceeds `theta_v`.
pub fn dropout_predict(
    params: &EncoderParams,
    sample: &DialogSample,
    vocab: &Vocabulary,
    kind: ScoreKind,
    keep: f64,
    n_passes: usize,
    seed: u64,
    theta_v: f64,
) -> Result<(Decision, DropoutSummary)> {
    if n_passes < 2 {
        return Err(Error::InvalidArgument(format!(
            "variance needs at least 2 dropout passes, got {n_passes}"
        )));
    }
    let n_cands = sample.candidates.len();
    let mut votes = vec![0usize; n_cands];
    let mut per_pass: Vec<Vec<f64>> = Vec::with_capacity(n_passes);
    for pass in 0..n_passes {
        let sv = forward_sample(
            params,
            sample,
            vocab,
            Dropout::On {
                keep,
                seed: seed + pass as u64,
            },
        )?;
        votes[sv.argmax()] += 1;
        per_pass.push(kind.select(&sv).to_vec());
    }

    let mut means = vec![0.0; n_cands];
    let mut variances = vec![0.0; n_cands];
    for c in 0..n_cands {
        let mut sum = 0.0;
        for pass in &per_pass {
            sum += pass[c];
        }
        let mean = sum / n_passes as f64;
        let mut sq = 0.0;
        for pass in &per_pass {
            let d = pass[c] - mean;
            sq += d * d;
        }
        means[c] = mean;
        variances[c] = sq / n_passes as f64;
    }

    // Majority vote; ties broken by the higher mean score.
    let mut winner = 0usize;
    for c in 1..n_cands {
        if votes[c] > votes[winner] || (votes[c] == votes[winner] && means[c] > means[winner]) {
            winner = c;
        }
    }
    let variance = variances[winner];
    let verdict = if variance > theta_v {
        Verdict::Nota
    } else {
        Verdict::Candidate(winner)
    };
    Ok((
        Decision {
            verdict,
            confidence: -variance,
        },
        DropoutSummary { means, variances },
    ))
}

/// Which side of a swept threshold counts as a rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepRule {
    /// Reject when the statistic is strictly below θ (max-score thresholds).
    BelowIsNota,
    /// Reject when the statistic is strictly above θ (variance thresholds).
    AboveIsNota,
}

/// Grid-search θ maximizing the average of the rejection-class and
/// ground-truth-class F1 scores; ties go to the smallest θ.
///
/// `stats` holds the per-sample decision statistic (max score or variance)
/// and `is_nota` the ground-truth rejection labels.
pub fn sweep_threshold(
    stats: &[f64],
    is_nota: &[bool],
    grid: &[f64],
    rule: SweepRule,
) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty threshold grid".into()));
    }
    if stats.len() != is_nota.len() {
        return Err(Error::InvalidArgument(format!(
            "{} statistics vs {} labels",
            stats.len(),
            is_nota.len()
        )));
    }
    let mut best: Option<(f64, f64)> = None;
    for &theta in grid {
        let mut counts = crate::metrics::ConfusionCounts::default();
        for (&s, &label) in stats.iter().zip(is_nota) {
            let verdict_nota = match rule {
                SweepRule::BelowIsNota => s < theta,
                SweepRule::AboveIsNota => s > theta,
            };
            counts.record(label, verdict_nota);
        }
        let f1 = crate::metrics::f1_pair(&counts).average;
        let better = match best {
            None => true,
            Some((best_f1, best_theta)) => {
                f1 > best_f1 || (f1 == best_f1 && theta < best_theta)
            }
        };
        if better {
            best = Some((f1, theta));
        }
    }
    let (f1, theta) = best.expect("nonempty grid");
    Ok((theta, f1))
}
