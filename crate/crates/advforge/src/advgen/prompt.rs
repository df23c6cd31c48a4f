//! Control-token prompt sequences: [attr, z, label, y', text, S, eos].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attribution::AttributionRecord;
use crate::corpus::{Example, ExampleBody, TokenSequence, Vocab};
use crate::error::{Error, Result};

use super::Partition;

/// Per-token segment tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegTag {
    AttrTok,
    Z,
    LabelTok,
    YPrime,
    TextTok,
    S,
    Eos,
}

/// Train mode emits the full sequence ending in EOS; decode mode emits the
/// prefix the generator continues from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode {
    Train,
    Decode,
}

/// A prompt with per-token segment tags. Surfaces ride along so that z and S
/// can be recovered exactly even when they contain out-of-vocabulary tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSequence {
    pub ids: Vec<usize>,
    pub surfaces: Vec<String>,
    pub segments: Vec<SegTag>,
    pub source_example: String,
    pub y_prime: usize,
}

impl PromptSequence {
    fn push(&mut self, id: usize, surface: impl Into<String>, tag: SegTag) {
        self.ids.push(id);
        self.surfaces.push(surface.into());
        self.segments.push(tag);
    }

    /// True for target positions that belong to the generated content (S and
    /// EOS); used when prompt tokens are masked out of the loss.
    pub fn text_targets(&self) -> Vec<bool> {
        self.segments.iter().map(|t| matches!(t, SegTag::S | SegTag::Eos)).collect()
    }

    /// Decode-mode prompts carry no EOS segment.
    pub fn is_decode_prefix(&self) -> bool {
        !self.segments.iter().any(|t| matches!(t, SegTag::Eos))
    }
}

/// Assembles the prompt for one example. Train mode appends the full S and EOS;
/// decode mode stops after the text marker (single-text) or after the premise
/// and separator (pair tasks, where only the hypothesis is generated).
/// z tokens are rendered in original-position order.
///
/// Errors if the assembled sequence exceeds `max_ctx`; callers that want the
/// left-truncation policy use [`build_training_prompt`] / [`build_decode_prompt`].
pub fn build_prompt_sequence(
    example: &Example,
    z: &[(usize, String)],
    y_prime: usize,
    mode: PromptMode,
    vocab: &Vocab,
    max_ctx: usize,
) -> Result<PromptSequence> {
    if z.is_empty() {
        return Err(Error::invalid("z", "influential token list must be non-empty"));
    }
    if y_prime >= vocab.num_classes() {
        return Err(Error::TargetOutOfRange { target: y_prime, num_classes: vocab.num_classes() });
    }
    let input = example.classifier_input(vocab);
    let mut z_sorted: Vec<&(usize, String)> = z.iter().collect();
    z_sorted.sort_by_key(|(pos, _)| *pos);

    let mut prompt = PromptSequence {
        ids: Vec::new(),
        surfaces: Vec::new(),
        segments: Vec::new(),
        source_example: example.id.clone(),
        y_prime,
    };
    prompt.push(vocab.attr_id(), "<attr>", SegTag::AttrTok);
    for (pos, surface) in z_sorted {
        let id = *input.ids.get(*pos).ok_or_else(|| {
            Error::invalid("z", format!("position {pos} out of range for example {}", example.id))
        })?;
        prompt.push(id, surface.clone(), SegTag::Z);
    }
    prompt.push(vocab.label_id(), "<label>", SegTag::LabelTok);
    let y_id = vocab.label_word_id(y_prime);
    prompt.push(y_id, vocab.token(y_id).unwrap(), SegTag::YPrime);
    prompt.push(vocab.text_id(), "<text>", SegTag::TextTok);

    match (mode, &example.body) {
        (PromptMode::Train, _) => {
            push_sequence(&mut prompt, &input);
            prompt.push(vocab.eos_id(), "<eos>", SegTag::Eos);
        }
        (PromptMode::Decode, ExampleBody::SingleText(_)) => {}
        (PromptMode::Decode, ExampleBody::Pair { premise, .. }) => {
            push_sequence(&mut prompt, premise);
            prompt.push(vocab.sep_id(), "<sep>", SegTag::S);
        }
    }

    if prompt.ids.len() > max_ctx {
        return Err(Error::SequenceTooLong {
            id: example.id.clone(),
            len: prompt.ids.len(),
            max: max_ctx,
        });
    }
    Ok(prompt)
}

fn push_sequence(prompt: &mut PromptSequence, seq: &TokenSequence) {
    for (id, surface) in seq.ids.iter().zip(&seq.surfaces) {
        prompt.push(*id, surface.clone(), SegTag::S);
    }
}

/// Left-truncates the text portion of `example` so a prompt with `reserve`
/// control tokens fits in `max_ctx`. Control tokens are never dropped.
fn shrink_text(example: &Example, reserve: usize, max_ctx: usize, id: &str) -> Result<Example> {
    if reserve > max_ctx {
        return Err(Error::SequenceTooLong { id: id.to_string(), len: reserve, max: max_ctx });
    }
    let budget = max_ctx - reserve;
    let mut ex = example.clone();
    match &mut ex.body {
        ExampleBody::SingleText(text) => {
            if text.len() > budget {
                let cut = text.len() - budget;
                text.ids.drain(..cut);
                text.surfaces.drain(..cut);
            }
        }
        ExampleBody::Pair { premise, hypothesis } => {
            let total = premise.len() + 1 + hypothesis.len();
            if total > budget {
                let mut cut = total - budget;
                let from_premise = cut.min(premise.len());
                premise.ids.drain(..from_premise);
                premise.surfaces.drain(..from_premise);
                cut -= from_premise;
                if cut > 0 {
                    let from_hyp = cut.min(hypothesis.len());
                    hypothesis.ids.drain(..from_hyp);
                    hypothesis.surfaces.drain(..from_hyp);
                }
            }
        }
    }
    Ok(ex)
}

/// Builds a train-mode prompt with `y' = y`, left-truncating the S segment to
/// fit `max_ctx` when needed. z positions must refer to the untruncated input.
pub fn build_training_prompt(
    example: &Example,
    z: &[(usize, String)],
    vocab: &Vocab,
    max_ctx: usize,
) -> Result<PromptSequence> {
    // attr + z + label + y' + text + eos
    let reserve = 1 + z.len() + 3 + 1;
    let shrunk = shrink_text(example, reserve, max_ctx, &example.id)?;
    // z ids must survive truncation: resolve them against the original input,
    // then rebuild against the shrunk example by value.
    let input = example.classifier_input(vocab);
    let mut prompt = build_prompt_sequence(&shrunk, &remap_z(z, &input, &shrunk, vocab)?, example.gold_label, PromptMode::Train, vocab, max_ctx)?;
    prompt.source_example = example.id.clone();
    Ok(prompt)
}

/// Builds a decode-mode prompt, left-truncating the premise for pair tasks when
/// needed. The hypothesis never counts against the budget — it is generated.
pub fn build_decode_prompt(
    example: &Example,
    z: &[(usize, String)],
    y_prime: usize,
    vocab: &Vocab,
    max_ctx: usize,
) -> Result<PromptSequence> {
    let control = 1 + z.len() + 3; // attr, z, label, y', text
    let shrunk = match &example.body {
        ExampleBody::SingleText(_) => {
            if control > max_ctx {
                return Err(Error::SequenceTooLong { id: example.id.clone(), len: control, max: max_ctx });
            }
            example.clone()
        }
        ExampleBody::Pair { .. } => {
            let need = control + 1; // + sep
            if need > max_ctx {
                return Err(Error::SequenceTooLong { id: example.id.clone(), len: need, max: max_ctx });
            }
            let budget = max_ctx - need;
            let mut ex = example.clone();
            if let ExampleBody::Pair { premise, .. } = &mut ex.body {
                if premise.len() > budget {
                    let cut = premise.len() - budget;
                    premise.ids.drain(..cut);
                    premise.surfaces.drain(..cut);
                }
            }
            ex
        }
    };
    let input = example.classifier_input(vocab);
    let mut prompt = build_prompt_sequence(
        &shrunk,
        &remap_z(z, &input, &shrunk, vocab)?,
        y_prime,
        PromptMode::Decode,
        vocab,
        max_ctx,
    )?;
    prompt.source_example = example.id.clone();
    Ok(prompt)
}

/// Re-anchors z entries after a left truncation. Positions shift down by the
/// number of dropped tokens; entries that pointed into the dropped region
/// re-anchor to the first surviving occurrence of the same token id.
fn remap_z(
    z: &[(usize, String)],
    original_input: &TokenSequence,
    shrunk: &Example,
    vocab: &Vocab,
) -> Result<Vec<(usize, String)>> {
    let new_input = shrunk.classifier_input(vocab);
    if new_input.len() == original_input.len() {
        return Ok(z.to_vec());
    }
    let offset = original_input.len() - new_input.len();
    let mut out = Vec::with_capacity(z.len());
    for (pos, surface) in z {
        // positions shift left by the number of dropped tokens; entries that
        // pointed into the dropped region keep their surface but anchor to the
        // first surviving occurrence of the same id, if any
        if *pos >= offset {
            out.push((*pos - offset, surface.clone()));
        } else if let Some(&id) = original_input.ids.get(*pos) {
            if let Some(new_pos) = new_input.ids.iter().position(|i| *i == id) {
                out.push((new_pos, surface.clone()));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("z", "all influential tokens were truncated away"));
    }
    Ok(out)
}

/// Builds train-mode prompts for every correctly-classified example in the
/// partition. Only `d1` is read, so the generator can never train on
/// misclassified seeds.
pub fn build_training_prompts(
    partition: &Partition,
    attributions: &BTreeMap<String, AttributionRecord>,
    vocab: &Vocab,
    max_ctx: usize,
) -> Result<Vec<PromptSequence>> {
    let mut prompts = Vec::with_capacity(partition.d1.len());
    for ex in &partition.d1.examples {
        let rec = attributions.get(&ex.id).ok_or_else(|| {
            Error::invalid("attributions", format!("no attribution record for example {}", ex.id))
        })?;
        let z: Vec<(usize, String)> =
            rec.z.iter().map(|&pos| (pos, rec.tokens[pos].clone())).collect();
        prompts.push(build_training_prompt(ex, &z, vocab, max_ctx)?);
    }
    Ok(prompts)
}

/// The pieces recovered from a train-mode prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub z_surfaces: Vec<String>,
    pub label_class: usize,
    pub s_surfaces: Vec<String>,
}

/// Structural inverse of [`build_prompt_sequence`] for train-mode prompts.
/// Recovery uses the marker token ids, not the segment tags.
pub fn parse_prompt_sequence(prompt: &PromptSequence, vocab: &Vocab) -> Result<ParsedPrompt> {
    let ids = &prompt.ids;
    let bad = |msg: &str| Error::invalid("prompt", msg.to_string());
    if ids.first() != Some(&vocab.attr_id()) {
        return Err(bad("missing leading attr token"));
    }
    let label_pos =
        ids.iter().position(|&i| i == vocab.label_id()).ok_or_else(|| bad("missing label token"))?;
    let y_pos = label_pos + 1;
    let label_class = vocab
        .class_of_label_word(*ids.get(y_pos).ok_or_else(|| bad("missing label word"))?)
        .ok_or_else(|| bad("label word is not a label token"))?;
    let text_pos = y_pos + 1;
    if ids.get(text_pos) != Some(&vocab.text_id()) {
        return Err(bad("missing text token"));
    }
    let eos_pos =
        ids.iter().position(|&i| i == vocab.eos_id()).ok_or_else(|| bad("missing eos token"))?;
    Ok(ParsedPrompt {
        z_surfaces: prompt.surfaces[1..label_pos].to_vec(),
        label_class,
        s_surfaces: prompt.surfaces[text_pos + 1..eos_pos].to_vec(),
    })
}
