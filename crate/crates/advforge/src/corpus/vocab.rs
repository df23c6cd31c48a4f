//! Vocabulary with a fixed reserved region for control and special tokens.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::split_words;

/// Fixed special tokens, in reserved-id order. Label-word tokens follow these,
/// one per class name, so the full reserved region is `SPECIAL_TOKENS.len() + num_classes`.
pub const SPECIAL_TOKENS: [&str; 8] =
    ["<pad>", "<unk>", "<mask>", "<attr>", "<label>", "<text>", "<sep>", "<eos>"];

/// Bidirectional token/id map. Reserved ids occupy `0..num_reserved()` and can
/// never collide with corpus tokens: special and label-word surfaces contain
/// angle brackets, which the tokenizer always splits apart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocab {
    id_to_token: Vec<String>,
    #[serde(skip)]
    token_to_id: HashMap<String, usize>,
    label_names: Vec<String>,
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.id_to_token == other.id_to_token && self.label_names == other.label_names
    }
}

impl Eq for Vocab {}

impl Vocab {
    fn from_parts(id_to_token: Vec<String>, label_names: Vec<String>) -> Self {
        let token_to_id =
            id_to_token.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { id_to_token, token_to_id, label_names }
    }

    /// Rebuilds the inverse map after deserialization.
    pub fn rebuild_index(&mut self) {
        self.token_to_id =
            self.id_to_token.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn pad_id(&self) -> usize {
        0
    }

    pub fn unk_id(&self) -> usize {
        1
    }

    pub fn mask_id(&self) -> usize {
        2
    }

    pub fn attr_id(&self) -> usize {
        3
    }

    pub fn label_id(&self) -> usize {
        4
    }

    pub fn text_id(&self) -> usize {
        5
    }

    pub fn sep_id(&self) -> usize {
        6
    }

    pub fn eos_id(&self) -> usize {
        7
    }

    /// Reserved id of the label-word token for `class`.
    pub fn label_word_id(&self, class: usize) -> usize {
        assert!(class < self.label_names.len(), "class {class} out of range");
        SPECIAL_TOKENS.len() + class
    }

    /// Inverse of [`Vocab::label_word_id`]; `None` if `id` is not a label word.
    pub fn class_of_label_word(&self, id: usize) -> Option<usize> {
        let base = SPECIAL_TOKENS.len();
        if id >= base && id < base + self.label_names.len() {
            Some(id - base)
        } else {
            None
        }
    }

    pub fn num_reserved(&self) -> usize {
        SPECIAL_TOKENS.len() + self.label_names.len()
    }

    pub fn is_reserved(&self, id: usize) -> bool {
        id < self.num_reserved()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    /// Canonical byte serialization used for checkpoint integrity hashes.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for t in &self.id_to_token {
            out.extend_from_slice(t.as_bytes());
            out.push(b'\n');
        }
        out.push(0);
        for l in &self.label_names {
            out.extend_from_slice(l.as_bytes());
            out.push(b'\n');
        }
        out
    }
}

/// Builds a vocabulary from raw text records.
///
/// Contains every normalized token occurring at least `min_count` times, after the
/// reserved block (specials, then one label-word token per class). Corpus tokens are
/// ordered by descending count, ties broken lexicographically, so the result is
/// independent of record order.
pub fn build_vocab(records: &[String], label_names: &[String], min_count: usize) -> Result<Vocab> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if min_count == 0 {
        return Err(Error::invalid("min_count", "must be >= 1"));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for record in records {
        for w in split_words(record) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(String, usize)> =
        counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut id_to_token: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    for name in label_names {
        id_to_token.push(format!("<y:{name}>"));
    }
    id_to_token.extend(kept.into_iter().map(|(t, _)| t));
    Ok(Vocab::from_parts(id_to_token, label_names.to_vec()))
}
