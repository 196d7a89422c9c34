use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "_PAD";
pub const UNK_TOKEN: &str = "_UNK";
pub const NOTA_TOKEN: &str = "_NOTA";

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const NOTA_ID: u32 = 2;

const RESERVED: [&str; 3] = [PAD_TOKEN, UNK_TOKEN, NOTA_TOKEN];

/// Token-to-id mapping with dense ids and reserved `_PAD`/`_UNK`/`_NOTA`
/// entries. Out-of-vocabulary lookups resolve to `_UNK`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(|s| s.as_str())
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Content hash used to bind checkpoints to the vocabulary they were
    /// trained with.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for token in &self.id_to_token {
            hasher.update(token.as_bytes());
            hasher.update([0u8]);
        }
        hex_digest(&hasher.finalize())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Build a vocabulary from the `max_vocab` most frequent tokens in the
/// stream, plus the reserved tokens. Frequency ties break lexicographically.
pub fn build_vocab<'a, I>(corpus: I, max_vocab: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a [String]>,
{
    assert!(max_vocab >= 1, "max_vocab must be at least 1");
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for seq in corpus {
        for token in seq {
            *freq.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    if freq.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut ranked: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|(t, _)| !RESERVED.contains(t))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_vocab);

    let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    id_to_token.extend(ranked.iter().map(|(t, _)| t.to_string()));
    let token_to_id = id_to_token
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    Ok(Vocabulary {
        token_to_id,
        id_to_token,
    })
}
