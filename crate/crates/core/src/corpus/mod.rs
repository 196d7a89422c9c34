//! Corpus construction: vocabularies, tokenization, NOTA evaluation sets,
//! candidate-set expansion, synthetic corpus generation, and file I/O.

mod eval_set;
mod io;
mod synth;
mod vocab;

pub use eval_set::{expand_candidates, make_nota_eval_set, NotaMode};
pub use io::{load_split, save_split, Format};
pub use synth::{bow_overlap_argmax, generate_synthetic_corpus, SynthConfig};
pub use vocab::{build_vocab, Vocabulary, NOTA_ID, NOTA_TOKEN, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};

use serde::{Deserialize, Serialize};

/// Contexts keep their last tokens, responses their first.
pub const CONTEXT_MAX_TOKENS: usize = 160;
pub const RESPONSE_MAX_TOKENS: usize = 80;

/// Sample label: either the index of the ground-truth candidate or the
/// assertion that no candidate is correct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    GroundTruth(usize),
    IsNota,
}

/// One dialog context with an ordered candidate response list.
///
/// Tokens are kept as strings so file round-trips are lossless; encoding to
/// vocabulary ids happens at the encoder boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogSample {
    pub context: Vec<String>,
    pub candidates: Vec<Vec<String>>,
    pub label: Label,
}

impl DialogSample {
    /// Index of the ground-truth candidate, if present.
    pub fn truth_index(&self) -> Option<usize> {
        match self.label {
            Label::GroundTruth(i) => Some(i),
            Label::IsNota => None,
        }
    }

    /// Whether candidate `i` is the literal `[_NOTA]` sequence.
    pub fn is_nota_candidate(&self, i: usize) -> bool {
        self.candidates[i].len() == 1 && self.candidates[i][0] == NOTA_TOKEN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Validation,
    Test,
}

/// An immutable list of samples with its corpus role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub samples: Vec<DialogSample>,
    pub role: SplitRole,
}

impl CorpusSplit {
    pub fn new(samples: Vec<DialogSample>, role: SplitRole) -> Self {
        Self { samples, role }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Candidate-set size, assuming a homogeneous split.
    pub fn candidate_count(&self) -> Option<usize> {
        self.samples.first().map(|s| s.candidates.len())
    }
}

/// Lowercase whitespace tokenization. Reserved marker tokens pass through
/// unchanged so they survive save/load round-trips.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            if t == NOTA_TOKEN || t == PAD_TOKEN || t == UNK_TOKEN {
                t.to_string()
            } else {
                t.to_lowercase()
            }
        })
        .collect()
}

/// Truncate a context to its last [`CONTEXT_MAX_TOKENS`] tokens.
pub fn truncate_context(tokens: &[String]) -> &[String] {
    let start = tokens.len().saturating_sub(CONTEXT_MAX_TOKENS);
    &tokens[start..]
}

/// Truncate a response to its first [`RESPONSE_MAX_TOKENS`] tokens.
pub fn truncate_response(tokens: &[String]) -> &[String] {
    &tokens[..tokens.len().min(RESPONSE_MAX_TOKENS)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_splits() {
        assert_eq!(tokenize("Hello  World\tFoo"), vec!["hello", "world", "foo"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn truncation_keeps_context_tail_and_response_head() {
        let long: Vec<String> = (0..200).map(|i| i.to_string()).collect();
        let ctx = truncate_context(&long);
        assert_eq!(ctx.len(), CONTEXT_MAX_TOKENS);
        assert_eq!(ctx[0], "40");
        let resp = truncate_response(&long);
        assert_eq!(resp.len(), RESPONSE_MAX_TOKENS);
        assert_eq!(resp[0], "0");
    }
}
