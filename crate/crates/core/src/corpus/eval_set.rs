use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSplit, DialogSample, Label, NOTA_TOKEN};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// How NOTA evaluation sets mark the absent ground truth.
///
/// `Direct` plants a literal `[_NOTA]` candidate; `Threshold` removes a
/// candidate outright, leaving x-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NotaMode {
    Direct,
    Threshold,
}

/// Lowest-index candidate that is not the ground truth.
fn first_distractor(sample: &DialogSample, truth: usize) -> usize {
    (0..sample.candidates.len())
        .find(|&i| i != truth)
        .expect("sample with a single candidate has no distractor")
}

/// Turn a ground-truth-complete split into a NOTA evaluation split.
///
/// A seeded `nota_fraction` of samples (exact count, `round(fraction * n)`)
/// become `IsNota`: their ground truth is replaced by `[_NOTA]` in direct
/// mode or removed in threshold mode. The remaining samples have their first
/// distractor replaced or removed the same way, so in direct mode every
/// sample carries exactly one `[_NOTA]` candidate and in threshold mode
/// none does.
pub fn make_nota_eval_set(
    split: &CorpusSplit,
    mode: NotaMode,
    nota_fraction: f64,
    seed: u64,
) -> Result<CorpusSplit> {
    assert!(
        (0.0..=1.0).contains(&nota_fraction),
        "nota_fraction must lie in [0, 1]"
    );
    for (index, sample) in split.samples.iter().enumerate() {
        if sample.truth_index().is_none() {
            return Err(Error::MissingGroundTruth { index });
        }
    }

    let n = split.len();
    let target = (nota_fraction * n as f64).round() as usize;
    // Seeded Bernoulli draw, then exact-count correction by seeded flips.
    let mut rng = stream_rng(seed, "nota-eval-partition");
    let mut is_nota: Vec<bool> = (0..n).map(|_| rng.gen_bool(nota_fraction.clamp(0.0, 1.0))).collect();
    let mut count = is_nota.iter().filter(|&&b| b).count();
    while count != target {
        let i = rng.gen_range(0..n);
        if count < target && !is_nota[i] {
            is_nota[i] = true;
            count += 1;
        } else if count > target && is_nota[i] {
            is_nota[i] = false;
            count -= 1;
        }
    }

    let nota_seq = vec![NOTA_TOKEN.to_string()];
    let samples = split
        .samples
        .iter()
        .zip(&is_nota)
        .map(|(sample, &to_nota)| {
            let truth = sample.truth_index().unwrap();
            let mut out = sample.clone();
            let victim = if to_nota {
                truth
            } else {
                first_distractor(sample, truth)
            };
            match mode {
                NotaMode::Direct => out.candidates[victim] = nota_seq.clone(),
                NotaMode::Threshold => {
                    out.candidates.remove(victim);
                }
            }
            out.label = if to_nota {
                Label::IsNota
            } else {
                let remapped = match mode {
                    NotaMode::Direct => truth,
                    NotaMode::Threshold => {
                        if victim < truth {
                            truth - 1
                        } else {
                            truth
                        }
                    }
                };
                Label::GroundTruth(remapped)
            };
            out
        })
        .collect();
    Ok(CorpusSplit::new(samples, split.role))
}

/// Grow every sample's candidate set to `target_x` by drawing distractors
/// from other samples' candidates, seeded and distinct per sample. Never
/// draws a sample's own ground truth, a duplicate of an existing candidate,
/// or a candidate that shares a token with the recipient's context — the
/// last rule keeps expansion from planting accidental extra ground truths.
pub fn expand_candidates(
    split: &CorpusSplit,
    target_x: usize,
    seed: u64,
) -> Result<CorpusSplit> {
    let current_x = split.candidate_count().unwrap_or(0);
    assert!(
        target_x >= current_x,
        "target_x must not shrink the candidate set"
    );
    if target_x == current_x {
        return Ok(split.clone());
    }

    // Pool of (owner sample, candidate text).
    let pool: Vec<(usize, &Vec<String>)> = split
        .samples
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.candidates.iter().map(move |c| (i, c)))
        .collect();

    let mut rng = stream_rng(seed, "expand-candidates");
    let mut samples = Vec::with_capacity(split.len());
    for (i, sample) in split.samples.iter().enumerate() {
        let needed = target_x - sample.candidates.len();
        let mut out = sample.clone();
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut rng);
        let mut added = 0;
        for &p in &order {
            if added == needed {
                break;
            }
            let (owner, text) = pool[p];
            if owner == i {
                continue;
            }
            if out.candidates.contains(text) {
                continue;
            }
            if text.iter().any(|t| sample.context.contains(t)) {
                continue;
            }
            out.candidates.push(text.clone());
            added += 1;
        }
        if added < needed {
            return Err(Error::PoolExhausted {
                needed,
                found: added,
            });
        }
        samples.push(out);
    }
    Ok(CorpusSplit::new(samples, split.role))
}
