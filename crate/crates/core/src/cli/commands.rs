//! The six pipeline commands. Each reads its inputs from the configured
//! output directory (as produced by earlier stages), writes its outputs back
//! under it, and records every written file in the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::corpus::{
    build_vocab, expand_candidates, generate_synthetic_corpus, load_split, make_nota_eval_set,
    save_split, CorpusSplit, DialogSample, Format, Label, NotaMode, SplitRole, SynthConfig,
    Vocabulary,
};
use crate::encoder::{forward_sample, load_checkpoint, save_checkpoint, Dropout, EncoderParams};
use crate::metrics::{
    histograms, write_histogram_csv, write_histogram_svg, write_roc_csv, write_roc_svg,
    write_trend_csv, write_trend_svg, EvalRecord, EvalReport, TrendPoint,
};
use crate::nota::{
    direct_predict, dropout_predict, logreg_predict, logreg_train, sweep_threshold, threshold_predict,
    Decision, FeatureSpec, LogRegModel, LogRegTrainConfig, ScoreKind, SweepRule,
};
use crate::rng::derive_seed;
use crate::{Error, Result};

use super::{
    sha256_hex, DetectorConfig, DetectorKind, ExperimentConfig, Manifest,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TrainVariant {
    /// Trained on the untouched corpus; backs threshold/logreg/dropout.
    Plain,
    /// Trained on data where withheld ground truths become an explicit
    /// rejection candidate; backs direct prediction.
    Direct,
}

impl TrainVariant {
    fn label(self) -> &'static str {
        match self {
            TrainVariant::Plain => "plain",
            TrainVariant::Direct => "direct",
        }
    }
}

impl std::str::FromStr for TrainVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<TrainVariant> {
        match s {
            "plain" => Ok(TrainVariant::Plain),
            "direct" => Ok(TrainVariant::Direct),
            other => Err(Error::InvalidArgument(format!(
                "unknown training variant {other:?} (expected plain|direct)"
            ))),
        }
    }
}

fn data_dir(config: &ExperimentConfig) -> PathBuf {
    config.output_dir.join("data")
}

fn checkpoint_path(config: &ExperimentConfig, variant: TrainVariant) -> PathBuf {
    config
        .output_dir
        .join(format!("checkpoint-{}.json", variant.label()))
}

fn load_jsonl(config: &ExperimentConfig, rel: &str, role: SplitRole) -> Result<CorpusSplit> {
    load_split(
        &data_dir(config).join(rel),
        Format::Jsonl,
        role,
        derive_seed(config.seed, &format!("load-{rel}")),
    )
}

/// Keep the ground truth and the first `target_x - 1` other candidates,
/// preserving their relative order.
fn shrink_candidates(split: &CorpusSplit, target_x: usize) -> Result<CorpusSplit> {
    let mut samples = Vec::with_capacity(split.len());
    for (index, sample) in split.samples.iter().enumerate() {
        let truth = sample
            .truth_index()
            .ok_or(Error::MissingGroundTruth { index })?;
        let mut candidates = Vec::with_capacity(target_x);
        let mut others_kept = 0;
        let mut new_truth = 0;
        for (i, cand) in sample.candidates.iter().enumerate() {
            if i == truth {
                new_truth = candidates.len();
                candidates.push(cand.clone());
            } else if others_kept + 1 < target_x {
                others_kept += 1;
                candidates.push(cand.clone());
            }
        }
        samples.push(DialogSample {
            context: sample.context.clone(),
            candidates,
            label: Label::GroundTruth(new_truth),
        });
    }
    Ok(CorpusSplit::new(samples, split.role))
}

/// Expand or shrink every sample's candidate set to exactly `target_x`.
fn resize_split(split: &CorpusSplit, target_x: usize, seed: u64) -> Result<CorpusSplit> {
    let current = split.candidate_count().unwrap_or(0);
    if target_x >= current {
        expand_candidates(split, target_x, seed)
    } else {
        shrink_candidates(split, target_x)
    }
}

fn save_and_record(
    split: &CorpusSplit,
    path: &Path,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    save_split(split, path, Format::Jsonl)?;
    manifest.record(out_dir, path)
}

/// Builds (or synthesizes) the base splits, derives per-x evaluation sets in
/// both rejection modes, and writes everything plus a content-hash manifest.
pub fn cmd_preprocess(config: &ExperimentConfig) -> Result<()> {
    let out_dir = &config.output_dir;
    let data = data_dir(config);
    std::fs::create_dir_all(&data)?;
    let mut manifest = Manifest::load_or_default(out_dir);
    manifest.config_sha256 = sha256_hex(
        serde_json::to_string(config)
            .expect("config serializes")
            .as_bytes(),
    );

    let (train, validation, test) = if config.corpus.source == "synthetic" {
        generate_synthetic_corpus(&SynthConfig {
            n_samples: config.corpus.n_samples,
            x: config.corpus.x,
            vocab_size: config.corpus.vocab_size,
            seed: derive_seed(config.seed, "synth"),
        })
    } else {
        let format: Format = config.corpus.format.parse()?;
        let source = Path::new(&config.corpus.source);
        let mut splits = Vec::new();
        for (name, role) in [
            ("train", SplitRole::Train),
            ("validation", SplitRole::Validation),
            ("test", SplitRole::Test),
        ] {
            splits.push(load_split(
                &source.join(format!("{name}.jsonl")),
                format,
                role,
                derive_seed(config.seed, &format!("load-source-{name}")),
            )?);
        }
        let mut it = splits.into_iter();
        (
            it.next().expect("train"),
            it.next().expect("validation"),
            it.next().expect("test"),
        )
    };

    save_and_record(&train, &data.join("train.jsonl"), out_dir, &mut manifest)?;
    save_and_record(
        &validation,
        &data.join("validation.jsonl"),
        out_dir,
        &mut manifest,
    )?;
    save_and_record(&test, &data.join("test.jsonl"), out_dir, &mut manifest)?;

    // Training/model-selection data for the direct-prediction variant: a
    // fraction of ground truths is withheld and replaced by the rejection
    // candidate.
    for (split, name) in [(&train, "train"), (&validation, "validation")] {
        let direct = make_nota_eval_set(
            split,
            NotaMode::Direct,
            config.corpus.nota_fraction,
            derive_seed(config.seed, &format!("nota-{name}-direct-base")),
        )?;
        save_and_record(
            &direct,
            &data.join(format!("{name}-direct.jsonl")),
            out_dir,
            &mut manifest,
        )?;
    }

    for &x in &config.eval.x_sweep {
        let x_dir = data.join(format!("x{x}"));
        std::fs::create_dir_all(&x_dir)?;
        for (split, name) in [(&validation, "validation"), (&test, "test")] {
            let resized = resize_split(
                split,
                x,
                derive_seed(config.seed, &format!("expand-{name}-x{x}")),
            )?;
            save_and_record(
                &resized,
                &x_dir.join(format!("{name}.jsonl")),
                out_dir,
                &mut manifest,
            )?;
            // Direct mode replaces a candidate in place, so it starts from x
            // candidates; threshold mode removes one, so it starts from x+1.
            // Either way every evaluation sample shows exactly x candidates.
            let direct_set = make_nota_eval_set(
                &resized,
                NotaMode::Direct,
                config.corpus.nota_fraction,
                derive_seed(config.seed, &format!("nota-{name}-x{x}-direct")),
            )?;
            save_and_record(
                &direct_set,
                &x_dir.join(format!("{name}-direct.jsonl")),
                out_dir,
                &mut manifest,
            )?;
            let widened = resize_split(
                &resized,
                x + 1,
                derive_seed(config.seed, &format!("expand-{name}-x{x}-widened")),
            )?;
            let threshold_set = make_nota_eval_set(
                &widened,
                NotaMode::Threshold,
                config.corpus.nota_fraction,
                derive_seed(config.seed, &format!("nota-{name}-x{x}-threshold")),
            )?;
            save_and_record(
                &threshold_set,
                &x_dir.join(format!("{name}-threshold.jsonl")),
                out_dir,
                &mut manifest,
            )?;
        }
    }

    manifest.save(out_dir)?;
    println!(
        "preprocess: {} train / {} validation / {} test samples, x sweep {:?}",
        train.len(),
        validation.len(),
        test.len(),
        config.eval.x_sweep
    );
    Ok(())
}

fn build_experiment_vocab(config: &ExperimentConfig) -> Result<(CorpusSplit, Vocabulary)> {
    let train = load_jsonl(config, "train.jsonl", SplitRole::Train)?;
    let sequences: Vec<&[String]> = train
        .samples
        .iter()
        .flat_map(|s| {
            std::iter::once(s.context.as_slice())
                .chain(s.candidates.iter().map(|c| c.as_slice()))
        })
        .collect();
    let vocab = build_vocab(sequences.into_iter(), config.corpus.vocab_size)?;
    Ok((train, vocab))
}

/// Rewrites withheld-truth samples so the explicit rejection candidate is the
/// training target; the selection objective then learns to pick it.
fn direct_training_view(split: &CorpusSplit) -> Result<CorpusSplit> {
    let mut samples = Vec::with_capacity(split.len());
    for (index, sample) in split.samples.iter().enumerate() {
        let mut sample = sample.clone();
        if sample.truth_index().is_none() {
            let nota = (0..sample.candidates.len())
                .find(|&i| sample.is_nota_candidate(i))
                .ok_or(Error::MissingGroundTruth { index })?;
            sample.label = Label::GroundTruth(nota);
        }
        samples.push(sample);
    }
    Ok(CorpusSplit::new(samples, split.role))
}

/// Trains one encoder variant and writes its best checkpoint plus an epoch
/// log (epoch, training loss, validation recall, wall seconds).
pub fn cmd_train(config: &ExperimentConfig, variant: TrainVariant) -> Result<PathBuf> {
    let started = Instant::now();
    let (plain_train, vocab) = build_experiment_vocab(config)?;
    let (train_split, val_split) = match variant {
        TrainVariant::Plain => (
            plain_train,
            load_jsonl(config, "validation.jsonl", SplitRole::Validation)?,
        ),
        TrainVariant::Direct => (
            direct_training_view(&load_jsonl(config, "train-direct.jsonl", SplitRole::Train)?)?,
            direct_training_view(&load_jsonl(
                config,
                "validation-direct.jsonl",
                SplitRole::Validation,
            )?)?,
        ),
    };

    // The direct variant warm-starts from the plain checkpoint when one is
    // present: from-scratch direct training can lock onto "always reject"
    // (half the labels) before any ranking signal develops, whereas a warm
    // start only has to place the rejection candidate's score level.
    let init = match variant {
        TrainVariant::Plain => EncoderParams::init(
            vocab.size(),
            config.model.d_emb(),
            config.model.d_hid(),
            derive_seed(config.seed, "init-plain"),
        ),
        TrainVariant::Direct => {
            let plain_path = checkpoint_path(config, TrainVariant::Plain);
            if plain_path.exists() {
                load_checkpoint(&plain_path)?.params
            } else {
                EncoderParams::init(
                    vocab.size(),
                    config.model.d_emb(),
                    config.model.d_hid(),
                    derive_seed(config.seed, "init-direct"),
                )
            }
        }
    };
    let mut train_config = config
        .train
        .to_train_config(derive_seed(config.seed, &format!("train-{}", variant.label())));
    if variant == TrainVariant::Direct {
        train_config.epochs = config.train.direct_epochs;
    }
    let outcome = crate::training::train(&train_config, init, &train_split, &val_split, &vocab)?;

    let path = checkpoint_path(config, variant);
    save_checkpoint(&outcome.best, &vocab.content_hash(), &path)?;

    let mut log = String::from("epoch,train_loss,val_recall,wall_secs\n");
    for e in &outcome.epochs {
        writeln!(log, "{},{},{},{}", e.epoch, e.train_loss, e.val_recall, e.wall_secs)
            .expect("string write");
    }
    let log_path = config
        .output_dir
        .join(format!("train-log-{}.csv", variant.label()));
    std::fs::write(&log_path, log)?;

    let mut manifest = Manifest::load_or_default(&config.output_dir);
    manifest.record(&config.output_dir, &path)?;
    manifest.record(&config.output_dir, &log_path)?;
    manifest.save(&config.output_dir)?;

    let best_recall = outcome
        .epochs
        .iter()
        .find(|e| e.epoch == outcome.best_epoch)
        .map(|e| e.val_recall)
        .unwrap_or(f64::NAN);
    println!(
        "train[{}]: best epoch {} (validation recall {:.4}) in {:.1}s",
        variant.label(),
        outcome.best_epoch,
        best_recall,
        started.elapsed().as_secs_f64()
    );
    Ok(path)
}

fn load_encoder(config: &ExperimentConfig, variant: TrainVariant) -> Result<(EncoderParams, String)> {
    let path = checkpoint_path(config, variant);
    let checkpoint = load_checkpoint(&path)?;
    let hash = sha256_hex(&std::fs::read(&path)?);
    Ok((checkpoint.params, hash))
}

fn score_split(
    params: &EncoderParams,
    split: &CorpusSplit,
    vocab: &Vocabulary,
) -> Result<Vec<crate::encoder::ScoreVector>> {
    split
        .samples
        .iter()
        .map(|s| forward_sample(params, s, vocab, Dropout::Off))
        .collect()
}

fn logreg_model_path(config: &ExperimentConfig, count: usize, kind: ScoreKind) -> PathBuf {
    config
        .output_dir
        .join("models")
        .join(format!("logreg-c{count}-{kind}.json"))
}

/// Trains one meta classifier per (candidate count, score kind) from the
/// validation splits scored by the plain encoder.
pub fn cmd_train_logreg(config: &ExperimentConfig) -> Result<()> {
    let (_, vocab) = build_experiment_vocab(config)?;
    let (params, checkpoint_hash) = load_encoder(config, TrainVariant::Plain)?;
    let models_dir = config.output_dir.join("models");
    std::fs::create_dir_all(&models_dir)?;
    let mut manifest = Manifest::load_or_default(&config.output_dir);

    for &x in &config.eval.x_sweep {
        let split = load_jsonl(
            config,
            &format!("x{x}/validation-threshold.jsonl"),
            SplitRole::Validation,
        )?;
        let count = split
            .candidate_count()
            .ok_or_else(|| Error::InvalidArgument("non-uniform candidate count".into()))?;
        let scored = score_split(&params, &split, &vocab)?;
        let labels: Vec<bool> = split
            .samples
            .iter()
            .map(|s| s.truth_index().is_some())
            .collect();
        for kind in [ScoreKind::Logits, ScoreKind::Softmax] {
            let features: Vec<Vec<f64>> = scored
                .iter()
                .map(|sv| crate::nota::logreg_features(kind.select(sv)))
                .collect();
            let train_config = LogRegTrainConfig {
                seed: derive_seed(config.seed, &format!("logreg-x{x}-{kind}")),
                ..Default::default()
            };
            let spec = FeatureSpec {
                score_kind: kind,
                x: count,
                includes_variance: false,
            };
            let mut model = logreg_train(&features, &labels, spec, &train_config)?;
            model.source_hash = checkpoint_hash.clone();
            let path = logreg_model_path(config, count, kind);
            model.save(&path)?;
            manifest.record(&config.output_dir, &path)?;
        }
    }
    manifest.save(&config.output_dir)?;
    println!("train-logreg: models for x in {:?}", config.eval.x_sweep);
    Ok(())
}

struct DetectorRun {
    records: Vec<EvalRecord>,
    /// (max score, rejection label) pairs for the histogram.
    max_scores: Vec<(f64, bool)>,
    /// CSV score-dump rows, already formatted.
    dump: String,
}

fn dump_row(out: &mut String, sample_id: &str, is_nota: bool, kind: &str, scores: &[f64]) {
    write!(out, "{sample_id},{},{kind}", is_nota as u8).expect("string write");
    for s in scores {
        write!(out, ",{s}").expect("string write");
    }
    out.push('\n');
}

fn run_detector(
    config: &ExperimentConfig,
    detector: &DetectorConfig,
    x: usize,
    split: &CorpusSplit,
    vocab: &Vocabulary,
    params: &EncoderParams,
    models: &mut BTreeMap<(usize, String), LogRegModel>,
) -> Result<DetectorRun> {
    let mut records = Vec::with_capacity(split.len());
    let mut max_scores = Vec::with_capacity(split.len());
    let mut dump = String::from("sample_id,is_nota_label,score_kind,scores...\n");
    let kind = detector.score_kind;
    let dropout_base = derive_seed(config.seed, &format!("dropout-eval-x{x}"));

    for (i, sample) in split.samples.iter().enumerate() {
        let sample_id = format!("{:?}-{i:05}", split.role).to_lowercase();
        let is_nota = sample.truth_index().is_none();
        let decision: Decision = match detector.kind {
            DetectorKind::Direct => {
                let sv = forward_sample(params, sample, vocab, Dropout::Off)?;
                max_scores.push((
                    sv.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    is_nota,
                ));
                dump_row(&mut dump, &sample_id, is_nota, "logits", &sv.logits);
                direct_predict(&sv)?
            }
            DetectorKind::Threshold => {
                let sv = forward_sample(params, sample, vocab, Dropout::Off)?;
                let scores = kind.select(&sv);
                max_scores.push((
                    scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    is_nota,
                ));
                dump_row(&mut dump, &sample_id, is_nota, &kind.to_string(), scores);
                threshold_predict(&sv, detector.effective_threshold(), kind)?
            }
            DetectorKind::Logreg => {
                let sv = forward_sample(params, sample, vocab, Dropout::Off)?;
                let scores = kind.select(&sv);
                max_scores.push((
                    scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    is_nota,
                ));
                dump_row(&mut dump, &sample_id, is_nota, &kind.to_string(), scores);
                let count = sample.candidates.len();
                let key = (count, kind.to_string());
                if !models.contains_key(&key) {
                    let model = LogRegModel::load(&logreg_model_path(config, count, kind))?;
                    models.insert(key.clone(), model);
                }
                logreg_predict(&models[&key], scores)?
            }
            DetectorKind::Dropout => {
                let n_passes = detector.n_passes.unwrap_or(config.eval.dropout_passes);
                let (decision, summary) = dropout_predict(
                    params,
                    sample,
                    vocab,
                    kind,
                    config.train.dropout_keep,
                    n_passes,
                    derive_seed(dropout_base, &format!("sample-{i}")),
                    detector.effective_threshold(),
                )?;
                max_scores.push((
                    summary.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    is_nota,
                ));
                dump_row(&mut dump, &sample_id, is_nota, &format!("{kind}-mean"), &summary.means);
                dump_row(
                    &mut dump,
                    &sample_id,
                    is_nota,
                    &format!("{kind}-var"),
                    &summary.variances,
                );
                decision
            }
        };
        records.push(EvalRecord {
            sample_id,
            label: sample.label.clone(),
            verdict: decision.verdict,
            // Report-side ranking is rejection-positive.
            confidence: -decision.confidence,
        });
    }
    Ok(DetectorRun {
        records,
        max_scores,
        dump,
    })
}

/// Evaluates every configured detector at every sweep x on the test split,
/// writing a report, ROC and histogram data, and a raw score dump per run.
pub fn cmd_evaluate(config: &ExperimentConfig) -> Result<()> {
    let (_, vocab) = build_experiment_vocab(config)?;
    let (plain, _) = load_encoder(config, TrainVariant::Plain)?;
    let direct = if config
        .detectors
        .iter()
        .any(|d| d.kind == DetectorKind::Direct)
    {
        Some(load_encoder(config, TrainVariant::Direct)?.0)
    } else {
        None
    };
    let mut manifest = Manifest::load_or_default(&config.output_dir);
    let mut models = BTreeMap::new();

    for detector in &config.detectors {
        for &x in &config.eval.x_sweep {
            let (split, params) = match detector.kind {
                DetectorKind::Direct => (
                    load_jsonl(config, &format!("x{x}/test-direct.jsonl"), SplitRole::Test)?,
                    direct.as_ref().expect("direct checkpoint loaded"),
                ),
                _ => (
                    load_jsonl(
                        config,
                        &format!("x{x}/test-threshold.jsonl"),
                        SplitRole::Test,
                    )?,
                    &plain,
                ),
            };
            let run = run_detector(config, detector, x, &split, &vocab, params, &mut models)?;

            let dir = config
                .output_dir
                .join("eval")
                .join(format!("{}-x{x}", detector.label()));
            std::fs::create_dir_all(&dir)?;

            let mut report = EvalReport::from_records(&detector.label(), x, &run.records);
            let hist = histograms(&run.max_scores, config.eval.histogram_bins)?;
            report.histogram = Some(hist.clone());

            let report_path = dir.join("report.json");
            let json = serde_json::to_string_pretty(&report).map_err(|source| Error::Json {
                path: report_path.display().to_string(),
                source,
            })?;
            std::fs::write(&report_path, json)?;
            manifest.record(&config.output_dir, &report_path)?;

            if let Some(roc) = &report.roc {
                write_roc_csv(roc, &dir.join("roc.csv"))?;
                write_roc_svg(roc, &dir.join("roc.svg"))?;
                manifest.record(&config.output_dir, &dir.join("roc.csv"))?;
                manifest.record(&config.output_dir, &dir.join("roc.svg"))?;
            }
            write_histogram_csv(&hist, &dir.join("hist.csv"))?;
            write_histogram_svg(&hist, &dir.join("hist.svg"))?;
            std::fs::write(dir.join("scores.csv"), &run.dump)?;
            for file in ["hist.csv", "hist.svg", "scores.csv"] {
                manifest.record(&config.output_dir, &dir.join(file))?;
            }
            println!(
                "evaluate[{} x={x}]: avg F1 {:.4}, recall {}",
                detector.label(),
                report.f1.average,
                report
                    .recall
                    .map(|r| format!("{r:.4}"))
                    .unwrap_or_else(|| "n/a".into())
            );
        }
    }
    manifest.save(&config.output_dir)?;
    Ok(())
}

/// Grid-searches rejection thresholds on the validation splits and writes the
/// best-θ table (one row per x and statistic).
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<()> {
    let (_, vocab) = build_experiment_vocab(config)?;
    let (params, _) = load_encoder(config, TrainVariant::Plain)?;
    let sweep_dropout = config
        .detectors
        .iter()
        .any(|d| d.kind == DetectorKind::Dropout);
    let mut out = String::from("x,statistic,theta,average_f1\n");

    for &x in &config.eval.x_sweep {
        let split = load_jsonl(
            config,
            &format!("x{x}/validation-threshold.jsonl"),
            SplitRole::Validation,
        )?;
        let labels: Vec<bool> = split
            .samples
            .iter()
            .map(|s| s.truth_index().is_none())
            .collect();
        let scored = score_split(&params, &split, &vocab)?;
        for kind in [ScoreKind::Logits, ScoreKind::Softmax] {
            let stats: Vec<f64> = scored
                .iter()
                .map(|sv| {
                    kind.select(sv)
                        .iter()
                        .cloned()
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let grid = even_grid(&stats, 101);
            let (theta, f1) = sweep_threshold(&stats, &labels, &grid, SweepRule::BelowIsNota)?;
            writeln!(out, "{x},max-{kind},{theta},{f1}").expect("string write");
        }
        if sweep_dropout {
            let base = derive_seed(config.seed, &format!("dropout-sweep-x{x}"));
            for kind in [ScoreKind::Logits, ScoreKind::Softmax] {
                let stats: Vec<f64> = split
                    .samples
                    .iter()
                    .enumerate()
                    .map(|(i, sample)| {
                        // θ_v = ∞ never rejects; the winning-candidate variance
                        // comes back as the negated confidence.
                        dropout_predict(
                            &params,
                            sample,
                            &vocab,
                            kind,
                            config.train.dropout_keep,
                            config.eval.dropout_passes,
                            derive_seed(base, &format!("sample-{i}")),
                            f64::INFINITY,
                        )
                        .map(|(decision, _)| -decision.confidence)
                    })
                    .collect::<Result<_>>()?;
                let grid = even_grid(&stats, 101);
                let (theta, f1) = sweep_threshold(&stats, &labels, &grid, SweepRule::AboveIsNota)?;
                writeln!(out, "{x},variance-{kind},{theta},{f1}").expect("string write");
            }
        }
    }

    let sweep_dir = config.output_dir.join("sweep");
    std::fs::create_dir_all(&sweep_dir)?;
    let path = sweep_dir.join("best-thresholds.csv");
    std::fs::write(&path, out)?;
    let mut manifest = Manifest::load_or_default(&config.output_dir);
    manifest.record(&config.output_dir, &path)?;
    manifest.save(&config.output_dir)?;
    println!("sweep: wrote {}", path.display());
    Ok(())
}

/// Evenly spaced grid spanning the observed statistic range.
fn even_grid(stats: &[f64], points: usize) -> Vec<f64> {
    let lo = stats.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = stats.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Merges every report under eval/ into a summary table and the
/// F1-versus-candidate-count trend figure.
pub fn cmd_report(config: &ExperimentConfig) -> Result<()> {
    let eval_dir = config.output_dir.join("eval");
    let mut reports = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(&eval_dir)?
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path().join("report.json");
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            let report: EvalReport = serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.display().to_string(),
                source,
            })?;
            reports.push(report);
        }
    }
    if reports.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no reports found under {}",
            eval_dir.display()
        )));
    }
    reports.sort_by(|a, b| (&a.detector, a.x).cmp(&(&b.detector, b.x)));

    let mut table = String::from(
        "detector,x,recall,nota_accuracy,rejection_f1,ground_truth_f1,average_f1,auc\n",
    );
    let mut trend = Vec::new();
    for r in &reports {
        let fmt_opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            table,
            "{},{},{},{},{},{},{},{}",
            r.detector,
            r.x,
            fmt_opt(r.recall),
            fmt_opt(r.nota_accuracy),
            r.f1.rejection_f1,
            r.f1.ground_truth_f1,
            r.f1.average,
            fmt_opt(r.roc.as_ref().map(|roc| roc.auc)),
        )
        .expect("string write");
        trend.push(TrendPoint {
            detector: r.detector.clone(),
            x: r.x,
            average_f1: r.f1.average,
        });
    }

    let report_dir = config.output_dir.join("report");
    std::fs::create_dir_all(&report_dir)?;
    std::fs::write(report_dir.join("table.csv"), table)?;
    write_trend_csv(&trend, &report_dir.join("trend.csv"))?;
    write_trend_svg(&trend, &report_dir.join("trend.svg"))?;
    let mut manifest = Manifest::load_or_default(&config.output_dir);
    for file in ["table.csv", "trend.csv", "trend.svg"] {
        manifest.record(&config.output_dir, &report_dir.join(file))?;
    }
    manifest.save(&config.output_dir)?;
    println!("report: {} detector/x rows", reports.len());
    Ok(())
}
