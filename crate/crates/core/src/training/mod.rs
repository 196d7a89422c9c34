//! Training: losses, exact gradients through the encoders, Adam with global
//! gradient clipping, and the epoch loop with validation-based checkpoint
//! selection.

mod backward;
mod losses;
mod optim;
mod trainer;

pub use backward::{backward, batch_loss, param_slices_mut, GradientSet};
pub use losses::{binary_loss, selection_loss};
pub use optim::{adam_step, adam_update, clip_gradients, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use trainer::{train, validation_recall, EpochStats, TrainOutcome};

use serde::{Deserialize, Serialize};

/// Training objective for the dual encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Binary cross-entropy on (context, response, label) pairs.
    Binary,
    /// Negative log likelihood over the candidate set.
    Selection,
    /// Selection loss with dropout active on both encoder outputs.
    Dropout,
}

impl std::str::FromStr for Objective {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "binary" => Ok(Objective::Binary),
            "selection" => Ok(Objective::Selection),
            "dropout" => Ok(Objective::Dropout),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown objective {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_keep: f64,
    pub objective: Objective,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            clip_norm: 5.0,
            batch_size: 128,
            epochs: 20,
            dropout_keep: 0.5,
            objective: Objective::Selection,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let mut errs = Vec::new();
        if self.learning_rate <= 0.0 {
            errs.push("learning_rate must be positive".to_string());
        }
        if self.clip_norm <= 0.0 {
            errs.push("clip_norm must be positive".to_string());
        }
        if self.batch_size == 0 {
            errs.push("batch_size must be positive".to_string());
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            errs.push("dropout_keep must lie in (0, 1]".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::InvalidConfig(errs))
        }
    }
}
