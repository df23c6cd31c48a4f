//! Candidate generation from decode prompts and filtering into attack records.

use serde::{Deserialize, Serialize};

use crate::corpus::{detokenize, tokenize, Dataset, ExampleBody, Vocab};
use crate::error::{Error, Result};
use crate::nnet::{decode, ClassifierModel, DecodeConfig, DecodeStrategy, GeneratorModel};

use super::prompt::PromptSequence;

/// Attack family a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMethod {
    NaLime,
    NaIg,
    Textfooler,
    Hotflip,
}

/// Decode settings echoed into every record for reproducibility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeMeta {
    pub strategy: DecodeStrategy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam: Option<usize>,
    pub seed: u64,
}

impl DecodeMeta {
    pub fn from_config(config: &DecodeConfig) -> Self {
        match config.strategy {
            DecodeStrategy::Topk => DecodeMeta {
                strategy: config.strategy,
                k: Some(config.k),
                beam: None,
                seed: config.seed,
            },
            DecodeStrategy::Beam => DecodeMeta {
                strategy: config.strategy,
                k: None,
                beam: Some(config.beam_size),
                seed: config.seed,
            },
        }
    }
}

/// One attack attempt, as serialized into the report JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub seed_id: String,
    pub method: AttackMethod,
    pub y: usize,
    pub y_prime: usize,
    pub generated: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub premise: Option<String>,
    pub pred_before: usize,
    pub pred_after: usize,
    pub success: bool,
    pub weak_success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_op: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decode: Option<DecodeMeta>,
}

/// A decoded candidate before filtering.
#[derive(Debug, Clone)]
pub struct GeneratedCandidate {
    pub seed_id: String,
    pub y_prime: usize,
    /// Detokenized continuation with special tokens dropped.
    pub text: String,
    pub empty: bool,
}

/// Decodes a continuation for a decode-mode prompt and detokenizes it.
/// Special tokens are stripped from the surface text; a candidate whose
/// continuation is empty (or all-special) is flagged for exclusion downstream.
pub fn generate_adversary(
    generator: &GeneratorModel,
    prompt: &PromptSequence,
    config: &DecodeConfig,
    vocab: &Vocab,
) -> Result<GeneratedCandidate> {
    if !prompt.is_decode_prefix() {
        return Err(Error::invalid("prompt", "expected a decode-mode prompt (no EOS segment)"));
    }
    let out = decode(generator, &prompt.ids, vocab.eos_id(), config)?;
    let continuation = &out[prompt.ids.len()..];
    let words: Vec<&str> = continuation
        .iter()
        .filter(|&&id| !vocab.is_reserved(id))
        .filter_map(|&id| vocab.token(id))
        .collect();
    let text = words.join(" ");
    Ok(GeneratedCandidate {
        seed_id: prompt.source_example.clone(),
        y_prime: prompt.y_prime,
        empty: text.is_empty(),
        text,
    })
}

/// Scores candidates against the target classifier. Drops candidates whose seed
/// was already misclassified (already adversarial) and empty generations, then
/// fills pred_before / pred_after / success for the survivors.
pub fn filter_candidates(
    candidates: &[GeneratedCandidate],
    seeds: &Dataset,
    target_model: &ClassifierModel,
    vocab: &Vocab,
    method: AttackMethod,
    decode_meta: Option<&DecodeMeta>,
) -> Result<Vec<AttackRecord>> {
    let mut records = Vec::new();
    for cand in candidates {
        let seed = seeds.find(&cand.seed_id).ok_or_else(|| {
            Error::invalid("candidates", format!("unknown seed example {}", cand.seed_id))
        })?;
        let pred_before = target_model.predict(&seed.classifier_input(vocab));
        if pred_before != seed.gold_label {
            continue; // seed already adversarial
        }
        if cand.empty {
            continue;
        }
        let (generated_input, premise) = match &seed.body {
            ExampleBody::SingleText(_) => (tokenize(&cand.text, vocab), None),
            ExampleBody::Pair { premise, .. } => {
                let mut seq = premise.clone();
                seq.push(vocab.sep_id(), "<sep>");
                let hyp = tokenize(&cand.text, vocab);
                seq.ids.extend_from_slice(&hyp.ids);
                seq.surfaces.extend_from_slice(&hyp.surfaces);
                (seq, Some(detokenize(premise)))
            }
        };
        let pred_after = target_model.predict(&generated_input);
        records.push(AttackRecord {
            seed_id: cand.seed_id.clone(),
            method,
            y: seed.gold_label,
            y_prime: cand.y_prime,
            generated: cand.text.clone(),
            premise,
            pred_before,
            pred_after,
            success: pred_after == cand.y_prime,
            weak_success: pred_after != seed.gold_label,
            queries: None,
            no_op: None,
            decode: decode_meta.cloned(),
        });
    }
    Ok(records)
}

/// Serializes records as JSONL (one record per line).
pub fn records_to_jsonl(records: &[AttackRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses a JSONL attack report.
pub fn records_from_jsonl(content: &str) -> Result<Vec<AttackRecord>> {
    let mut records = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: AttackRecord = serde_json::from_str(line)
            .map_err(|e| Error::MalformedLine { line: idx + 1, msg: e.to_string() })?;
        records.push(rec);
    }
    Ok(records)
}
