//! Logistic-regression meta classifier over per-candidate scores.
//!
//! Features are the candidate scores sorted descending, which makes the
//! classifier invariant to candidate order; dropout-based variants append
//! per-candidate variances alongside the means. One model is trained per
//! (candidate count, score kind, variance flag) combination and refuses
//! inputs with any other shape.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::ScoreVector;
use crate::training::{adam_update, binary_loss};
use crate::{Error, Result};

use super::{Decision, DropoutSummary, Verdict};

/// Which score the detectors look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Logits,
    Softmax,
}

impl ScoreKind {
    pub fn select<'a>(&self, sv: &'a ScoreVector) -> &'a [f64] {
        match self {
            ScoreKind::Logits => &sv.logits,
            ScoreKind::Softmax => &sv.probs,
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreKind::Logits => write!(f, "logits"),
            ScoreKind::Softmax => write!(f, "softmax"),
        }
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logits" => Ok(ScoreKind::Logits),
            "softmax" => Ok(ScoreKind::Softmax),
            other => Err(Error::InvalidArgument(format!(
                "unknown score kind {other:?} (expected logits|softmax)"
            ))),
        }
    }
}

/// Shape contract for a meta-classifier's inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub score_kind: ScoreKind,
    /// Candidate count the model was trained for.
    pub x: usize,
    /// Whether per-candidate variances follow the means (dropout variants).
    pub includes_variance: bool,
}

impl FeatureSpec {
    pub fn n_features(&self) -> usize {
        if self.includes_variance {
            2 * self.x
        } else {
            self.x
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub feature_spec: FeatureSpec,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Content hash of the encoder checkpoint the training scores came from.
    pub source_hash: String,
    pub seed: u64,
}

impl LogRegModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LogRegModel> {
        let text = std::fs::read_to_string(path)?;
        let model: LogRegModel = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        if model.weights.len() != model.feature_spec.n_features() {
            return Err(Error::FeatureSpecMismatch {
                expected: model.feature_spec.n_features(),
                got: model.weights.len(),
            });
        }
        Ok(model)
    }
}

/// Canonical feature vector for a plain score set: scores sorted descending.
pub fn logreg_features(scores: &[f64]) -> Vec<f64> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    sorted
}

/// Canonical feature vector for a dropout summary: means sorted descending,
/// then the matching variances in the same candidate order.
pub fn logreg_dropout_features(summary: &DropoutSummary) -> Vec<f64> {
    let mut order: Vec<usize> = (0..summary.means.len()).collect();
    order.sort_by(|&a, &b| {
        summary.means[b]
            .partial_cmp(&summary.means[a])
            .expect("finite means")
    });
    let mut features = Vec::with_capacity(2 * order.len());
    features.extend(order.iter().map(|&i| summary.means[i]));
    features.extend(order.iter().map(|&i| summary.variances[i]));
    features
}

#[derive(Debug, Clone, Copy)]
pub struct LogRegTrainConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    /// Stop once the loss improves by less than this between steps.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LogRegTrainConfig {
    fn default() -> Self {
        LogRegTrainConfig {
            learning_rate: 0.01,
            max_steps: 20_000,
            tolerance: 1e-9,
            seed: 0,
        }
    }
}

/// σ(w·φ + b) for a feature vector matching the model's shape contract.
pub fn predict_probability(model: &LogRegModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.feature_spec.n_features() {
        return Err(Error::FeatureSpecMismatch {
            expected: model.feature_spec.n_features(),
            got: features.len(),
        });
    }
    let z: f64 = model
        .weights
        .iter()
        .zip(features)
        .map(|(w, f)| w * f)
        .sum::<f64>()
        + model.bias;
    Ok(sigmoid(z))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Trains the meta classifier by full-batch Adam on mean binary cross-entropy.
///
/// `truth_present[i]` is true when sample i has a ground truth among its
/// candidates (the positive class); the learned probability is the model's
/// belief in that event.
pub fn logreg_train(
    feature_sets: &[Vec<f64>],
    truth_present: &[bool],
    spec: FeatureSpec,
    config: &LogRegTrainConfig,
) -> Result<LogRegModel> {
    if feature_sets.len() != truth_present.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature sets vs {} labels",
            feature_sets.len(),
            truth_present.len()
        )));
    }
    let n_features = spec.n_features();
    for features in feature_sets {
        if features.len() != n_features {
            return Err(Error::FeatureSpecMismatch {
                expected: n_features,
                got: features.len(),
            });
        }
    }
    let n_pos = truth_present.iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == truth_present.len() {
        return Err(Error::SingleClass);
    }

    let n = feature_sets.len() as f64;
    // Weights then bias, flat, so one Adam buffer covers everything.
    let mut theta = vec![0.0f64; n_features + 1];
    let mut m = vec![0.0f64; n_features + 1];
    let mut v = vec![0.0f64; n_features + 1];
    let mut grad = vec![0.0f64; n_features + 1];
    let mut prev_loss = f64::INFINITY;
    for step in 0..config.max_steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (features, &label) in feature_sets.iter().zip(truth_present) {
            let y = if label { 1.0 } else { 0.0 };
            let z: f64 = theta[..n_features]
                .iter()
                .zip(features)
                .map(|(w, f)| w * f)
                .sum::<f64>()
                + theta[n_features];
            loss += binary_loss(z, y);
            let d = (sigmoid(z) - y) / n;
            for (g, f) in grad[..n_features].iter_mut().zip(features) {
                *g += d * f;
            }
            grad[n_features] += d;
        }
        loss /= n;
        adam_update(
            &mut theta,
            &grad,
            &mut m,
            &mut v,
            step as u64 + 1,
            config.learning_rate,
        );
        if (prev_loss - loss).abs() < config.tolerance {
            break;
        }
        prev_loss = loss;
    }

    let bias = theta[n_features];
    theta.truncate(n_features);
    Ok(LogRegModel {
        feature_spec: spec,
        weights: theta,
        bias,
        source_hash: String::new(),
        seed: config.seed,
    })
}

/// Meta-classifier decision for a plain score set (original candidate order).
/// Rejects when the probability of a present ground truth is strictly below
/// one half; otherwise picks the top-scoring candidate.
pub fn logreg_predict(model: &LogRegModel, scores: &[f64]) -> Result<Decision> {
    if model.feature_spec.includes_variance {
        return Err(Error::InvalidArgument(
            "model expects dropout summaries, not plain score sets".into(),
        ));
    }
    let p = predict_probability(model, &logreg_features(scores))?;
    let verdict = if p < 0.5 {
        Verdict::Nota
    } else {
        Verdict::Candidate(crate::encoder::argmax(scores))
    };
    Ok(Decision {
        verdict,
        confidence: p,
    })
}

/// Meta-classifier decision for a dropout summary; the candidate verdict is
/// the highest-mean candidate.
pub fn logreg_predict_dropout(model: &LogRegModel, summary: &DropoutSummary) -> Result<Decision> {
    if !model.feature_spec.includes_variance {
        return Err(Error::InvalidArgument(
            "model expects plain score sets, not dropout summaries".into(),
        ));
    }
    let p = predict_probability(model, &logreg_dropout_features(summary))?;
    let verdict = if p < 0.5 {
        Verdict::Nota
    } else {
        Verdict::Candidate(crate::encoder::argmax(&summary.means))
    };
    Ok(Decision {
        verdict,
        confidence: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn plain_spec(x: usize) -> FeatureSpec {
        FeatureSpec {
            score_kind: ScoreKind::Logits,
            x,
            includes_variance: false,
        }
    }

    #[test]
    fn features_sort_descending_and_ignore_order() {
        assert_eq!(logreg_features(&[1.0, 3.0, 2.0]), vec![3.0, 2.0, 1.0]);
        assert_eq!(
            logreg_features(&[2.0, 1.0, 3.0]),
            logreg_features(&[3.0, 2.0, 1.0])
        );
    }

    #[test]
    fn softmax_features_still_sum_to_one() {
        let sv = ScoreVector::from_logits(vec![0.3, -1.0, 2.0], vec![false; 3]);
        let phi = logreg_features(&sv.probs);
        assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dropout_features_pair_variances_with_sorted_means() {
        let summary = DropoutSummary {
            means: vec![1.0, 3.0, 2.0],
            variances: vec![0.1, 0.3, 0.2],
        };
        assert_eq!(
            logreg_dropout_features(&summary),
            vec![3.0, 2.0, 1.0, 0.3, 0.2, 0.1]
        );
    }

    #[test]
    fn zero_model_sits_on_the_keep_side_of_the_boundary() {
        let model = LogRegModel {
            feature_spec: plain_spec(2),
            weights: vec![0.0, 0.0],
            bias: 0.0,
            source_hash: String::new(),
            seed: 0,
        };
        let d = logreg_predict(&model, &[0.4, 0.1]).unwrap();
        assert_eq!(d.confidence, 0.5);
        // p = 0.5 exactly keeps the argmax candidate: rejection needs strict <.
        assert_eq!(d.verdict, Verdict::Candidate(0));
    }

    #[test]
    fn saturated_negative_bias_always_rejects() {
        let model = LogRegModel {
            feature_spec: plain_spec(2),
            weights: vec![0.0, 0.0],
            bias: -10.0,
            source_hash: String::new(),
            seed: 0,
        };
        let mut rng = stream_rng(3, "logreg-saturated");
        for _ in 0..50 {
            let scores = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let d = logreg_predict(&model, &scores).unwrap();
            assert!(d.verdict.is_nota());
            assert_eq!(d.verdict.is_nota(), d.confidence < 0.5);
        }
    }

    #[test]
    fn wrong_candidate_count_is_refused() {
        let model = LogRegModel {
            feature_spec: plain_spec(10),
            weights: vec![0.0; 10],
            bias: 0.0,
            source_hash: String::new(),
            seed: 0,
        };
        assert!(matches!(
            logreg_predict(&model, &[0.0; 9]),
            Err(Error::FeatureSpecMismatch {
                expected: 10,
                got: 9
            })
        ));
    }

    /// Builds a set separable on the max feature: positives have scores near
    /// 2, negatives near -2.
    fn separable_set(n_per_class: usize, x: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = stream_rng(seed, "logreg-separable");
        let mut sets = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2 * n_per_class {
            let positive = i % 2 == 0;
            let center = if positive { 2.0 } else { -2.0 };
            let scores: Vec<f64> = (0..x)
                .map(|_| center + rng.gen_range(-0.5..0.5))
                .collect();
            sets.push(logreg_features(&scores));
            labels.push(positive);
        }
        (sets, labels)
    }

    #[test]
    fn separable_set_reaches_perfect_training_accuracy() {
        let (sets, labels) = separable_set(20, 3, 1);
        let config = LogRegTrainConfig {
            max_steps: 500,
            ..Default::default()
        };
        let model = logreg_train(&sets, &labels, plain_spec(3), &config).unwrap();
        for (phi, &y) in sets.iter().zip(&labels) {
            let p = predict_probability(&model, phi).unwrap();
            assert_eq!(p >= 0.5, y, "misclassified {phi:?} (p={p})");
        }
    }

    #[test]
    fn flipping_labels_negates_the_model() {
        let (sets, labels) = separable_set(10, 2, 2);
        let flipped: Vec<bool> = labels.iter().map(|&y| !y).collect();
        let config = LogRegTrainConfig::default();
        let a = logreg_train(&sets, &labels, plain_spec(2), &config).unwrap();
        let b = logreg_train(&sets, &flipped, plain_spec(2), &config).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa + wb).abs() < 1e-3);
        }
        assert!((a.bias + b.bias).abs() < 1e-3);
    }

    #[test]
    fn constant_features_learn_the_class_prior() {
        let n = 40;
        let sets: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0, 2.0]).collect();
        let labels: Vec<bool> = (0..n).map(|i| i % 4 == 0).collect(); // prior 0.25
        let model =
            logreg_train(&sets, &labels, plain_spec(2), &LogRegTrainConfig::default()).unwrap();
        let p = predict_probability(&model, &sets[0]).unwrap();
        assert!((p - 0.25).abs() < 1e-3, "p={p}");
    }

    #[test]
    fn single_class_data_is_an_error() {
        let sets = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            logreg_train(&sets, &[true, true], plain_spec(2), &Default::default()),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            logreg_train(&sets, &[false, false], plain_spec(2), &Default::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn model_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = LogRegModel {
            feature_spec: FeatureSpec {
                score_kind: ScoreKind::Softmax,
                x: 3,
                includes_variance: true,
            },
            weights: vec![0.25, -1.5, 0.0, 1.0, 2.0, -0.125],
            bias: 0.75,
            source_hash: "abc123".into(),
            seed: 42,
        };
        model.save(&path).unwrap();
        assert_eq!(LogRegModel::load(&path).unwrap(), model);
    }
}
