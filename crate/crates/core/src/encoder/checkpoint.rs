use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EncoderParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned checkpoint container binding parameters to the vocabulary they
/// were trained with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub vocab_hash: String,
    pub params: EncoderParams,
}

pub fn save_checkpoint(params: &EncoderParams, vocab_hash: &str, path: &Path) -> Result<()> {
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        vocab_hash: vocab_hash.to_string(),
        params: params.clone(),
    };
    let writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer(writer, &ckpt).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })
}

/// Load and validate a checkpoint's internal dimensions.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let reader = BufReader::new(File::open(path)?);
    let ckpt: Checkpoint = serde_json::from_reader(reader).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Unsupported(format!(
            "checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    let p = &ckpt.params;
    let checks = [
        (p.embedding.rows == p.vocab_size && p.embedding.cols == p.d_emb, "embedding"),
        (
            p.context_cell.w_input.rows == 4 * p.d_hid
                && p.context_cell.w_input.cols == p.d_emb
                && p.context_cell.w_recurrent.rows == 4 * p.d_hid
                && p.context_cell.w_recurrent.cols == p.d_hid
                && p.context_cell.bias.len() == 4 * p.d_hid,
            "context cell",
        ),
        (
            p.response_cell.w_input.rows == 4 * p.d_hid
                && p.response_cell.w_input.cols == p.d_emb
                && p.response_cell.w_recurrent.rows == 4 * p.d_hid
                && p.response_cell.w_recurrent.cols == p.d_hid
                && p.response_cell.bias.len() == 4 * p.d_hid,
            "response cell",
        ),
    ];
    for (ok, what) in checks {
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint {what} shapes disagree with declared dimensions"
            )));
        }
    }
    if p.embedding.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DimensionMismatch(
            "checkpoint embedding contains non-finite entries".into(),
        ));
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_params() {
        let params = EncoderParams::init(20, 4, 6, 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&params, "abc123", &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.params, params);
        assert_eq!(loaded.vocab_hash, "abc123");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut params = EncoderParams::init(20, 4, 6, 9);
        params.d_hid = 8; // declared dims now disagree with matrices
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&params, "h", &path).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
