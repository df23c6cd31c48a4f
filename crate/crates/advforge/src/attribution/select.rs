//! Influential-token selection from an attribution map.

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenSequence, Vocab};
use crate::error::{Error, Result};
use crate::util::{seeded_rng, softmax_inplace, uniform_f64};

use super::AttributionMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectStrategy {
    /// Highest scores, ties to the lower position. Deterministic.
    Topk,
    /// Draw without replacement with probability ∝ softmax(scores).
    WeightedSample,
}

/// Picks the influential tokens z: `ceil(fraction × len)` of them (at least one,
/// at most the number of eligible positions). Special and PAD tokens are never
/// candidates. The result is ordered by original position.
pub fn select_influential(
    attr: &AttributionMap,
    tokens: &TokenSequence,
    vocab: &Vocab,
    fraction: f64,
    strategy: SelectStrategy,
    seed: u64,
    abs_scores: bool,
) -> Result<Vec<(usize, String)>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("fraction", "must be in (0, 1]"));
    }
    attr.validate(tokens.len())?;
    let eligible: Vec<usize> =
        (0..tokens.len()).filter(|&p| !vocab.is_reserved(tokens.ids[p])).collect();
    if eligible.is_empty() {
        return Ok(Vec::new());
    }
    let want = ((fraction * tokens.len() as f64).ceil() as usize).max(1).min(eligible.len());
    let score_of = |p: usize| if abs_scores { attr.scores[p].abs() } else { attr.scores[p] };

    let mut picked: Vec<usize> = match strategy {
        SelectStrategy::Topk => {
            let mut order = eligible.clone();
            order.sort_by(|&a, &b| {
                score_of(b)
                    .partial_cmp(&score_of(a))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            order.into_iter().take(want).collect()
        }
        SelectStrategy::WeightedSample => {
            let mut rng = seeded_rng(seed);
            let mut pool = eligible.clone();
            let mut picked = Vec::with_capacity(want);
            while picked.len() < want && !pool.is_empty() {
                let mut probs: Vec<f64> = pool.iter().map(|&p| score_of(p)).collect();
                softmax_inplace(&mut probs);
                let u = uniform_f64(&mut rng);
                let mut acc = 0.0;
                let mut chosen = pool.len() - 1;
                for (i, pr) in probs.iter().enumerate() {
                    acc += pr;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                picked.push(pool.remove(chosen));
            }
            picked
        }
    };
    picked.sort_unstable();
    Ok(picked.into_iter().map(|p| (p, tokens.surfaces[p].clone())).collect())
}
