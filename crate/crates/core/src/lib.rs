//! Dual-encoder next-utterance selection with none-of-the-above (NOTA)
//! detection.
//!
//! The crate trains a pair of single-layer LSTM encoders that score a
//! candidate response against a dialog context by dot product, then measures
//! how well four decision procedures detect when the ground-truth response is
//! absent from the candidate set: direct prediction over an inserted `_NOTA`
//! candidate, score thresholding, a logistic-regression meta-classifier over
//! the full score set, and Monte-Carlo-dropout score variance.

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod nota;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
