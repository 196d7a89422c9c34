//! Experiment orchestration: a TOML config describing corpus, model, training
//! and detector settings, plus the six pipeline commands (preprocess, train,
//! train-logreg, evaluate, sweep, report).
//!
//! Every command is deterministic given (config, seed): reruns over identical
//! inputs produce byte-identical outputs. All outputs land under the
//! configured output directory together with a manifest of content hashes.
//! The `NOTAKIT_OUTPUT_DIR` environment variable overrides the output
//! directory; nothing else is read from the environment.

mod commands;

pub use commands::{
    cmd_evaluate, cmd_preprocess, cmd_report, cmd_sweep, cmd_train, cmd_train_logreg,
    TrainVariant,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::nota::ScoreKind;
use crate::training::{Objective, TrainConfig};
use crate::{Error, Result};

pub const OUTPUT_DIR_ENV: &str = "NOTAKIT_OUTPUT_DIR";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; every random draw in the pipeline derives from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpus: CorpusConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub eval: EvalConfig,
    pub detectors: Vec<DetectorConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            output_dir: PathBuf::from("out"),
            corpus: CorpusConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            eval: EvalConfig::default(),
            detectors: vec![
                DetectorConfig {
                    kind: DetectorKind::Direct,
                    ..DetectorConfig::default()
                },
                DetectorConfig {
                    kind: DetectorKind::Threshold,
                    ..DetectorConfig::default()
                },
                DetectorConfig {
                    kind: DetectorKind::Logreg,
                    ..DetectorConfig::default()
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// "synthetic" or a directory holding train/validation/test files.
    pub source: String,
    /// File format for non-synthetic sources: jsonl, tsv-binary, tsv-ranking.
    pub format: String,
    pub n_samples: usize,
    /// Candidate-set size of the base corpus.
    pub x: usize,
    pub vocab_size: usize,
    /// Fraction of evaluation samples whose ground truth is withheld.
    pub nota_fraction: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            source: "synthetic".into(),
            format: "jsonl".into(),
            n_samples: 1000,
            x: 10,
            vocab_size: 2000,
            nota_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 32-dim embeddings, 64-dim hidden state: minutes on a laptop core.
    Desk,
    /// 300-dim embeddings, 512-dim hidden state.
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub profile: Profile,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            profile: Profile::Desk,
        }
    }
}

impl ModelConfig {
    pub fn d_emb(&self) -> usize {
        match self.profile {
            Profile::Desk => 32,
            Profile::Full => 300,
        }
    }

    pub fn d_hid(&self) -> usize {
        match self.profile {
            Profile::Desk => 64,
            Profile::Full => 512,
        }
    }
}

/// Training hyperparameters as they appear in the config file; the root seed
/// is injected when converting to a [`TrainConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_keep: f64,
    pub objective: Objective,
    /// Epoch budget for the direct-variant fine-tune. Kept short on purpose:
    /// a long fine-tune pushes non-matching scores far below the rejection
    /// candidate's level, hiding the sensitivity of direct rejection to
    /// candidate-set size that the evaluation is meant to expose.
    pub direct_epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            clip_norm: d.clip_norm,
            batch_size: d.batch_size,
            epochs: d.epochs,
            dropout_keep: d.dropout_keep,
            objective: d.objective,
            direct_epochs: 2,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            clip_norm: self.clip_norm,
            batch_size: self.batch_size,
            epochs: self.epochs,
            dropout_keep: self.dropout_keep,
            objective: self.objective,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Candidate counts to evaluate at; eval sets are derived per entry.
    pub x_sweep: Vec<usize>,
    pub dropout_passes: usize,
    pub histogram_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            x_sweep: vec![2, 5, 10],
            dropout_passes: 20,
            histogram_bins: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Direct,
    Threshold,
    Logreg,
    Dropout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub score_kind: ScoreKind,
    /// Rejection threshold for threshold/dropout kinds; defaults per kind.
    pub threshold: Option<f64>,
    pub n_passes: Option<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            kind: DetectorKind::Threshold,
            score_kind: ScoreKind::Logits,
            threshold: None,
            n_passes: None,
        }
    }
}

impl DetectorConfig {
    /// Stable directory/file label, e.g. "threshold-logits".
    pub fn label(&self) -> String {
        let kind = match self.kind {
            DetectorKind::Direct => "direct",
            DetectorKind::Threshold => "threshold",
            DetectorKind::Logreg => "logreg",
            DetectorKind::Dropout => "dropout",
        };
        if self.kind == DetectorKind::Direct {
            kind.to_string()
        } else {
            format!("{kind}-{}", self.score_kind)
        }
    }

    pub fn effective_threshold(&self) -> f64 {
        use crate::nota::{
            DEFAULT_LOGIT_THRESHOLD, DEFAULT_LOGIT_VARIANCE_THRESHOLD, DEFAULT_SOFTMAX_THRESHOLD,
            DEFAULT_SOFTMAX_VARIANCE_THRESHOLD,
        };
        self.threshold.unwrap_or(match (self.kind, self.score_kind) {
            (DetectorKind::Dropout, ScoreKind::Logits) => DEFAULT_LOGIT_VARIANCE_THRESHOLD,
            (DetectorKind::Dropout, ScoreKind::Softmax) => DEFAULT_SOFTMAX_VARIANCE_THRESHOLD,
            (_, ScoreKind::Logits) => DEFAULT_LOGIT_THRESHOLD,
            (_, ScoreKind::Softmax) => DEFAULT_SOFTMAX_THRESHOLD,
        })
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(vec![format!("{}: {e}", path.display())]))?;
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            config.output_dir = PathBuf::from(dir);
        }
        config.validate()?;
        Ok(config)
    }

    /// Collects every violation instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.output_dir.as_os_str().is_empty() {
            problems.push("output_dir must not be empty".to_string());
        }
        if self.corpus.source != "synthetic" && !Path::new(&self.corpus.source).exists() {
            problems.push(format!(
                "corpus.source {:?} does not exist (and is not \"synthetic\")",
                self.corpus.source
            ));
        }
        if self.corpus.format.parse::<crate::corpus::Format>().is_err() {
            problems.push(format!("corpus.format {:?} is not a known format", self.corpus.format));
        }
        if self.corpus.n_samples == 0 {
            problems.push("corpus.n_samples must be positive".to_string());
        }
        if self.corpus.x < 2 {
            problems.push("corpus.x must be at least 2".to_string());
        }
        if self.corpus.vocab_size < 8 {
            problems.push("corpus.vocab_size must be at least 8".to_string());
        }
        if !(0.0..=1.0).contains(&self.corpus.nota_fraction) {
            problems.push("corpus.nota_fraction must lie in [0, 1]".to_string());
        }
        if self.eval.x_sweep.is_empty() {
            problems.push("eval.x_sweep must not be empty".to_string());
        }
        for &x in &self.eval.x_sweep {
            if x < 2 {
                problems.push(format!("eval.x_sweep entry {x} must be at least 2"));
            }
        }
        if self.eval.dropout_passes < 2 {
            problems.push("eval.dropout_passes must be at least 2".to_string());
        }
        if self.eval.histogram_bins == 0 {
            problems.push("eval.histogram_bins must be positive".to_string());
        }
        if self.detectors.is_empty() {
            problems.push("at least one detector must be configured".to_string());
        }
        for (i, d) in self.detectors.iter().enumerate() {
            if let Some(t) = d.threshold {
                if !t.is_finite() {
                    problems.push(format!("detectors[{i}].threshold must be finite"));
                }
            }
            if let Some(n) = d.n_passes {
                if n < 2 {
                    problems.push(format!("detectors[{i}].n_passes must be at least 2"));
                }
            }
        }
        if let Err(Error::InvalidConfig(mut train_problems)) =
            self.train.to_train_config(self.seed).validate()
        {
            problems.append(&mut train_problems);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// Content hashes of every file a run has produced, plus the config snapshot
/// hash, so reruns can be compared at a glance.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

impl Manifest {
    pub fn load_or_default(out_dir: &Path) -> Manifest {
        let path = out_dir.join("manifest.json");
        std::fs::read_to_string(&path)
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default()
    }

    /// Records a file that already exists on disk.
    pub fn record(&mut self, out_dir: &Path, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let rel = path
            .strip_prefix(out_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        self.files.insert(rel, sha256_hex(&bytes));
        Ok(())
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: out_dir.join("manifest.json").display().to_string(),
            source,
        })?;
        std::fs::write(out_dir.join("manifest.json"), json)?;
        Ok(())
    }
}

/// Stable identifier for an error variant, for machine-readable output.
pub fn error_kind(error: &Error) -> &'static str {
    match error {
        Error::EmptyCorpus => "empty_corpus",
        Error::MissingGroundTruth { .. } => "missing_ground_truth",
        Error::MalformedLine { .. } => "malformed_line",
        Error::PoolExhausted { .. } => "pool_exhausted",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::TokenOutOfRange { .. } => "token_out_of_range",
        Error::NonFinite { .. } => "non_finite",
        Error::NoNotaCandidate => "no_nota_candidate",
        Error::UnexpectedNotaCandidate => "unexpected_nota_candidate",
        Error::FeatureSpecMismatch { .. } => "feature_spec_mismatch",
        Error::SingleClass => "single_class",
        Error::InvalidConfig(_) => "invalid_config",
        Error::Unsupported(_) => "unsupported",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::Io(_) => "io",
        Error::Json { .. } => "json",
    }
}
