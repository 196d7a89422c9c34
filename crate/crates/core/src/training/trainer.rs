use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSplit, DialogSample, Label, Vocabulary, NOTA_TOKEN};
use crate::encoder::{forward_sample, Dropout, EncoderParams};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

use super::backward::backward;
use super::optim::{adam_step, clip_gradients, AdamState};
use super::{Objective, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_recall: f64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: EncoderParams,
    pub best_epoch: usize,
    pub epochs: Vec<EpochStats>,
}

/// R_x@1 with dropout off: fraction of ground-truth samples whose top-scored
/// candidate is the ground truth. IsNota samples are skipped.
pub fn validation_recall(
    params: &EncoderParams,
    split: &CorpusSplit,
    vocab: &Vocabulary,
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for sample in &split.samples {
        if let Some(truth) = sample.truth_index() {
            let sv = forward_sample(params, sample, vocab, Dropout::Off)?;
            if sv.argmax() == truth {
                correct += 1;
            }
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidArgument(
            "validation split has no ground-truth samples".into(),
        ));
    }
    Ok(correct as f64 / total as f64)
}

/// Length-bucketed batches: samples sorted by context length, chunked, then
/// the chunk order shuffled with the epoch seed.
fn make_batches(samples: &[DialogSample], batch_size: usize, epoch_seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = stream_rng(epoch_seed, "batch-order");
    // Shuffle first so equal-length ties vary across epochs, then stable
    // sort by length to bucket.
    order.shuffle(&mut rng);
    order.sort_by_key(|&i| samples[i].context.len());
    let mut batches: Vec<Vec<usize>> = order
        .chunks(batch_size)
        .map(|c| c.to_vec())
        .collect();
    batches.shuffle(&mut rng);
    batches
}

/// Binary-objective pairs for one epoch: each ranking sample yields its
/// positive pair plus one seeded negative drawn from another sample's
/// candidates.
fn binary_pairs(split: &CorpusSplit, epoch_seed: u64) -> Result<Vec<DialogSample>> {
    let n = split.len();
    let mut rng = stream_rng(epoch_seed, "binary-negatives");
    let mut pairs = Vec::with_capacity(2 * n);
    for (i, sample) in split.samples.iter().enumerate() {
        let truth = sample
            .truth_index()
            .ok_or(Error::MissingGroundTruth { index: i })?;
        pairs.push(DialogSample {
            context: sample.context.clone(),
            candidates: vec![sample.candidates[truth].clone()],
            label: Label::GroundTruth(0),
        });
        // Negative from another sample's candidate list.
        let other = loop {
            let j = rng.gen_range(0..n);
            if j != i || n == 1 {
                break j;
            }
        };
        let donor = &split.samples[other];
        let cand = &donor.candidates[rng.gen_range(0..donor.candidates.len())];
        pairs.push(DialogSample {
            context: sample.context.clone(),
            candidates: vec![cand.clone()],
            label: Label::IsNota,
        });
    }
    Ok(pairs)
}

/// Run the epoch loop and return the checkpoint with the highest validation
/// R_x@1 (ties resolved toward the earliest epoch).
pub fn train(
    config: &TrainConfig,
    init: EncoderParams,
    train_split: &CorpusSplit,
    val_split: &CorpusSplit,
    vocab: &Vocabulary,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut params = init;
    params.nota_trained = train_split
        .samples
        .iter()
        .any(|s| s.candidates.iter().any(|c| c.iter().any(|t| t == NOTA_TOKEN)));

    let mut state = AdamState::new(&params);
    let mut best = params.clone();
    let mut best_epoch = 0usize;
    let mut best_recall = f64::NEG_INFINITY;
    let mut stats = Vec::new();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let epoch_seed = derive_seed(config.seed, &format!("epoch-{epoch}"));
        let epoch_samples: Vec<DialogSample> = match config.objective {
            Objective::Binary => binary_pairs(train_split, epoch_seed)?,
            _ => train_split.samples.clone(),
        };
        let batches = make_batches(&epoch_samples, config.batch_size, epoch_seed);

        let mut loss_sum = 0.0;
        for (batch_idx, batch) in batches.iter().enumerate() {
            let items: Vec<DialogSample> =
                batch.iter().map(|&i| epoch_samples[i].clone()).collect();
            let dropout_seed = derive_seed(epoch_seed, &format!("batch-{batch_idx}"));
            let (loss, mut grads) = backward(
                &params,
                vocab,
                &items,
                config.objective,
                config.dropout_keep,
                dropout_seed,
            )
            .map_err(|e| match e {
                Error::NonFinite { context, .. } => Error::NonFinite {
                    context,
                    epoch,
                    batch: batch_idx,
                },
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    context: "training loss".into(),
                    epoch,
                    batch: batch_idx,
                });
            }
            loss_sum += loss;
            clip_gradients(&mut grads, config.clip_norm);
            adam_step(&mut params, &grads, &mut state, config.learning_rate);
        }

        let val_recall = validation_recall(&params, val_split, vocab)?;
        if val_recall > best_recall {
            best_recall = val_recall;
            best = params.clone();
            best_epoch = epoch;
        }
        stats.push(EpochStats {
            epoch,
            train_loss: loss_sum / batches.len().max(1) as f64,
            val_recall,
            wall_secs: started.elapsed().as_secs_f64(),
        });
    }

    Ok(TrainOutcome {
        best,
        best_epoch,
        epochs: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, generate_synthetic_corpus, SynthConfig};

    fn tiny_corpus() -> (CorpusSplit, CorpusSplit, Vocabulary) {
        let (train, val, _) = generate_synthetic_corpus(&SynthConfig {
            n_samples: 60,
            x: 3,
            vocab_size: 80,
            seed: 5,
        });
        let seqs: Vec<&[String]> = train
            .samples
            .iter()
            .flat_map(|s| {
                std::iter::once(s.context.as_slice())
                    .chain(s.candidates.iter().map(|c| c.as_slice()))
            })
            .collect();
        let vocab = build_vocab(seqs, 500).unwrap();
        (train, val, vocab)
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (train_split, val, vocab) = tiny_corpus();
        let init = EncoderParams::init(vocab.size(), 4, 6, 3);
        let config = TrainConfig {
            epochs: 0,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let out = train(&config, init.clone(), &train_split, &val, &vocab).unwrap();
        assert_eq!(out.best, init);
        assert_eq!(out.best_epoch, 0);
        assert!(out.epochs.is_empty());
    }

    #[test]
    fn same_seed_reproduces_best_checkpoint() {
        let (train_split, val, vocab) = tiny_corpus();
        let config = TrainConfig {
            epochs: 2,
            batch_size: 16,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let init = EncoderParams::init(vocab.size(), 4, 6, 3);
        let a = train(&config, init.clone(), &train_split, &val, &vocab).unwrap();
        let b = train(&config, init, &train_split, &val, &vocab).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.best_epoch, b.best_epoch);
    }

    #[test]
    fn binary_objective_trains_on_pairs() {
        let (train_split, val, vocab) = tiny_corpus();
        let config = TrainConfig {
            epochs: 1,
            batch_size: 16,
            objective: Objective::Binary,
            ..TrainConfig::default()
        };
        let init = EncoderParams::init(vocab.size(), 4, 6, 3);
        let out = train(&config, init, &train_split, &val, &vocab).unwrap();
        assert_eq!(out.epochs.len(), 1);
        assert!(out.epochs[0].train_loss.is_finite());
    }
}
