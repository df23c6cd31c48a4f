//! JSONL dataset loading and saving for single-text and premise/hypothesis tasks.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::atomic_write;

use super::{detokenize, tokenize, TokenSequence, Vocab};

/// Task shape: one text field, or a premise/hypothesis pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    SingleText,
    Pair,
}

/// Body of an example, matching its task kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExampleBody {
    SingleText(TokenSequence),
    Pair { premise: TokenSequence, hypothesis: TokenSequence },
}

/// One labeled example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub body: ExampleBody,
    pub gold_label: usize,
}

impl Example {
    pub fn task(&self) -> TaskKind {
        match self.body {
            ExampleBody::SingleText(_) => TaskKind::SingleText,
            ExampleBody::Pair { .. } => TaskKind::Pair,
        }
    }

    /// The sequence the classifier consumes: the text itself, or
    /// `premise <sep> hypothesis` for pair tasks.
    pub fn classifier_input(&self, vocab: &Vocab) -> TokenSequence {
        match &self.body {
            ExampleBody::SingleText(text) => text.clone(),
            ExampleBody::Pair { premise, hypothesis } => {
                let mut seq = premise.clone();
                seq.push(vocab.sep_id(), "<sep>");
                seq.ids.extend_from_slice(&hypothesis.ids);
                seq.surfaces.extend_from_slice(&hypothesis.surfaces);
                seq
            }
        }
    }
}

/// A labeled dataset; all examples share one task kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub task: TaskKind,
    pub examples: Vec<Example>,
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn find(&self, id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.id == id)
    }
}

/// One line of the JSONL wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub premise: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<String>,
    pub label: String,
}

/// Reads raw JSONL records without tokenizing; malformed lines report their
/// 1-based line number. Used to gather text for vocabulary construction.
pub fn load_raw_records(path: &Path, schema: TaskKind) -> Result<Vec<RawRecord>> {
    let content = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(line)
            .map_err(|e| Error::MalformedLine { line: line_no, msg: e.to_string() })?;
        match schema {
            TaskKind::SingleText => {
                if rec.text.is_none() {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        msg: "missing \"text\" field".into(),
                    });
                }
            }
            TaskKind::Pair => {
                if rec.premise.is_none() || rec.hypothesis.is_none() {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        msg: "missing \"premise\"/\"hypothesis\" field".into(),
                    });
                }
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// All text fields of the records, for vocabulary construction.
pub fn record_texts(records: &[RawRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for r in records {
        if let Some(t) = &r.text {
            out.push(t.clone());
        }
        if let Some(p) = &r.premise {
            out.push(p.clone());
        }
        if let Some(h) = &r.hypothesis {
            out.push(h.clone());
        }
    }
    out
}

/// Loads a JSONL dataset. Ids default to the 0-based line position when absent;
/// labels outside `label_names` are rejected.
pub fn load_dataset(
    path: &Path,
    schema: TaskKind,
    label_names: &[String],
    vocab: &Vocab,
) -> Result<Dataset> {
    let records = load_raw_records(path, schema)?;
    let mut examples = Vec::with_capacity(records.len());
    for (idx, rec) in records.into_iter().enumerate() {
        let line_no = idx + 1;
        let gold_label = label_names
            .iter()
            .position(|l| *l == rec.label)
            .ok_or_else(|| Error::UnknownLabel { line: line_no, label: rec.label.clone() })?;
        let id = rec.id.clone().unwrap_or_else(|| idx.to_string());
        let body = match schema {
            TaskKind::SingleText => ExampleBody::SingleText(tokenize(rec.text.as_deref().unwrap(), vocab)),
            TaskKind::Pair => ExampleBody::Pair {
                premise: tokenize(rec.premise.as_deref().unwrap(), vocab),
                hypothesis: tokenize(rec.hypothesis.as_deref().unwrap(), vocab),
            },
        };
        examples.push(Example { id, body, gold_label });
    }
    Ok(Dataset { task: schema, examples, label_names: label_names.to_vec() })
}

/// Writes a dataset back to JSONL; inverse of [`load_dataset`] field-for-field.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for ex in &dataset.examples {
        let rec = match &ex.body {
            ExampleBody::SingleText(text) => RawRecord {
                id: Some(ex.id.clone()),
                text: Some(detokenize(text)),
                premise: None,
                hypothesis: None,
                label: dataset.label_names[ex.gold_label].clone(),
            },
            ExampleBody::Pair { premise, hypothesis } => RawRecord {
                id: Some(ex.id.clone()),
                text: None,
                premise: Some(detokenize(premise)),
                hypothesis: Some(detokenize(hypothesis)),
                label: dataset.label_names[ex.gold_label].clone(),
            },
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}
