//! Tokenization, vocabulary management, and dataset ingestion.
//!
//! Word-level scheme: lowercase, split on whitespace, every punctuation mark its
//! own token. Out-of-vocabulary tokens map to the UNK id but keep their surface
//! form so perturbed or generated text can be re-serialized.

mod dataset;
mod vocab;

pub use dataset::{
    load_dataset, load_raw_records, record_texts, save_dataset, Dataset, Example, ExampleBody,
    RawRecord, TaskKind,
};
pub use vocab::{build_vocab, Vocab, SPECIAL_TOKENS};

use serde::{Deserialize, Serialize};

/// A tokenized sequence: vocabulary ids plus the original surface forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub surfaces: Vec<String>,
}

impl TokenSequence {
    pub fn new(ids: Vec<usize>, surfaces: Vec<String>) -> Self {
        assert_eq!(ids.len(), surfaces.len(), "ids and surfaces must have equal length");
        TokenSequence { ids, surfaces }
    }

    pub fn empty() -> Self {
        TokenSequence { ids: Vec::new(), surfaces: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, id: usize, surface: impl Into<String>) {
        self.ids.push(id);
        self.surfaces.push(surface.into());
    }

    /// Concatenates `other` onto a copy of `self`.
    pub fn concat(&self, other: &TokenSequence) -> TokenSequence {
        let mut out = self.clone();
        out.ids.extend_from_slice(&other.ids);
        out.surfaces.extend_from_slice(&other.surfaces);
        out
    }
}

/// Splits raw text into normalized word tokens: lowercased, whitespace-delimited,
/// each punctuation character emitted as its own token.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
        } else if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                word.push(lc);
            }
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            out.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Tokenizes `text` against `vocab`. Unknown words map to UNK but keep their surface.
/// An empty string yields an empty sequence.
pub fn tokenize(text: &str, vocab: &Vocab) -> TokenSequence {
    let words = split_words(text);
    let mut seq = TokenSequence::empty();
    for w in words {
        let id = vocab.id_of(&w).unwrap_or_else(|| vocab.unk_id());
        seq.push(id, w);
    }
    seq
}

/// Joins surfaces with single spaces — the normalized form of the original text.
pub fn detokenize(seq: &TokenSequence) -> String {
    seq.surfaces.join(" ")
}
