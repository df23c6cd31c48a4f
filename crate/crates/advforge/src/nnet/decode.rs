//! Top-k sampling and length-normalized beam search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{seeded_rng, uniform_f64};

use super::GeneratorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStrategy {
    Topk,
    Beam,
}

/// Decoding parameters. `max_len` caps the total sequence length (prompt included).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub strategy: DecodeStrategy,
    pub k: usize,
    pub beam_size: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { strategy: DecodeStrategy::Topk, k: 10, beam_size: 10, max_len: 150, seed: 0 }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k", "must be >= 1"));
        }
        if self.beam_size == 0 {
            return Err(Error::invalid("beam_size", "must be >= 1"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid("max_len", "must be >= 1"));
        }
        Ok(())
    }
}

/// Dispatches on the configured strategy.
pub fn decode(
    model: &GeneratorModel,
    prompt: &[usize],
    eos_id: usize,
    config: &DecodeConfig,
) -> Result<Vec<usize>> {
    match config.strategy {
        DecodeStrategy::Topk => decode_topk(model, prompt, eos_id, config),
        DecodeStrategy::Beam => decode_beam(model, prompt, eos_id, config),
    }
}

fn length_cap(model: &GeneratorModel, config: &DecodeConfig) -> usize {
    config.max_len.min(model.max_ctx)
}

/// Tokens sorted by (probability desc, id asc); the stable order makes every
/// decoding strategy deterministic under ties.
fn ranked(probs: &[f64]) -> Vec<(usize, f64)> {
    let mut pairs: Vec<(usize, f64)> = probs.iter().copied().enumerate().collect();
    pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    pairs
}

/// Greedy argmax decoding; the shared degenerate case of top-k(k=1) and beam(1).
pub fn decode_greedy(
    model: &GeneratorModel,
    prompt: &[usize],
    eos_id: usize,
    max_len: usize,
) -> Vec<usize> {
    let cap = max_len.min(model.max_ctx);
    let mut ids = prompt.to_vec();
    while ids.len() < cap {
        let probs = model.next_distribution(&ids);
        let next = ranked(&probs)[0].0;
        ids.push(next);
        if next == eos_id {
            break;
        }
    }
    ids
}

/// Samples from the renormalized top-k distribution at every step until EOS or
/// the length cap. Deterministic given the seed.
pub fn decode_topk(
    model: &GeneratorModel,
    prompt: &[usize],
    eos_id: usize,
    config: &DecodeConfig,
) -> Result<Vec<usize>> {
    config.validate()?;
    if prompt.is_empty() {
        return Err(Error::invalid("prompt", "must be non-empty"));
    }
    let cap = length_cap(model, config);
    let mut rng = seeded_rng(config.seed);
    let mut ids = prompt.to_vec();
    while ids.len() < cap {
        let probs = model.next_distribution(&ids);
        let top: Vec<(usize, f64)> = ranked(&probs).into_iter().take(config.k).collect();
        let total: f64 = top.iter().map(|(_, p)| p).sum();
        let u = uniform_f64(&mut rng) * total;
        let mut acc = 0.0;
        let mut next = top[top.len() - 1].0;
        for (id, p) in &top {
            acc += p;
            if u < acc {
                next = *id;
                break;
            }
        }
        ids.push(next);
        if next == eos_id {
            break;
        }
    }
    Ok(ids)
}

#[derive(Clone)]
struct Hypothesis {
    ids: Vec<usize>,
    log_prob: f64,
    generated: usize,
}

impl Hypothesis {
    /// Length-normalized score: mean log-probability over generated tokens.
    fn score(&self) -> f64 {
        self.log_prob / self.generated.max(1) as f64
    }
}

/// First hypothesis with the maximal score; pool order encodes the tie rule.
fn best_of(hyps: &[Hypothesis]) -> Option<&Hypothesis> {
    let mut best: Option<&Hypothesis> = None;
    for h in hyps {
        if best.map_or(true, |b| h.score() > b.score()) {
            best = Some(h);
        }
    }
    best
}

/// Length-normalized beam search (score = mean log-probability over generated
/// tokens). Returns the best EOS-terminated hypothesis; if none finished before
/// the length cap, the best capped one. Candidate ties break by token id, then
/// beam index.
pub fn decode_beam(
    model: &GeneratorModel,
    prompt: &[usize],
    eos_id: usize,
    config: &DecodeConfig,
) -> Result<Vec<usize>> {
    config.validate()?;
    if prompt.is_empty() {
        return Err(Error::invalid("prompt", "must be non-empty"));
    }
    let cap = length_cap(model, config);
    if prompt.len() >= cap {
        return Ok(prompt.to_vec());
    }
    let mut active = vec![Hypothesis { ids: prompt.to_vec(), log_prob: 0.0, generated: 0 }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut capped: Vec<Hypothesis> = Vec::new();

    while !active.is_empty() {
        // candidates: (score, token id, parent beam index, log_prob)
        let mut candidates: Vec<(f64, usize, usize, f64)> = Vec::new();
        for (parent, hyp) in active.iter().enumerate() {
            let probs = model.next_distribution(&hyp.ids);
            for (tok, p) in probs.iter().enumerate() {
                let log_prob = hyp.log_prob + p.ln();
                let score = log_prob / (hyp.generated + 1) as f64;
                candidates.push((score, tok, parent, log_prob));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        let mut next_active = Vec::with_capacity(config.beam_size);
        for &(_, tok, parent, log_prob) in candidates.iter().take(config.beam_size) {
            let src = &active[parent];
            let mut ids = src.ids.clone();
            ids.push(tok);
            let hyp = Hypothesis { ids, log_prob, generated: src.generated + 1 };
            if tok == eos_id {
                finished.push(hyp);
            } else if hyp.ids.len() >= cap {
                capped.push(hyp);
            } else {
                next_active.push(hyp);
            }
        }
        active = next_active;
    }

    if let Some(h) = best_of(&finished) {
        return Ok(h.ids.clone());
    }
    if let Some(h) = best_of(&capped) {
        return Ok(h.ids.clone());
    }
    Ok(prompt.to_vec())
}
