//! Probing stage: per-token attribution scores via integrated gradients
//! (white-box) or LIME (black-box), and influential-token selection.

mod ig;
mod lime;
mod select;

pub use ig::{ig_attribute, integrated_gradients, IgConfig, ScoreWithGrad};
pub use lime::{lime_attribute, lime_attribute_with_fit, LimeConfig, LimeFit, Predict};
pub use select::{select_influential, SelectStrategy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which attribution backend produced a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    Lime,
    Ig,
}

/// Per-position attribution scores for one (sequence, target class) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMap {
    pub scores: Vec<f64>,
    pub target_class: usize,
    pub method: AttributionMethod,
    /// Id of the example the scores belong to.
    pub sequence_ref: String,
}

impl AttributionMap {
    pub fn validate(&self, seq_len: usize) -> Result<()> {
        if self.scores.len() != seq_len {
            return Err(Error::LengthMismatch { left: self.scores.len(), right: seq_len });
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("non-finite attribution score".into()));
        }
        Ok(())
    }
}

/// One line of the attribution dump JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub id: String,
    pub method: AttributionMethod,
    pub target_class: usize,
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
    /// Selected influential positions, in original order.
    pub z: Vec<usize>,
}

/// Serializes attribution records as JSONL.
pub fn attribution_to_jsonl(records: &[AttributionRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses an attribution dump.
pub fn attribution_from_jsonl(content: &str) -> Result<Vec<AttributionRecord>> {
    let mut records = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: AttributionRecord = serde_json::from_str(line)
            .map_err(|e| Error::MalformedLine { line: idx + 1, msg: e.to_string() })?;
        records.push(rec);
    }
    Ok(records)
}
