//! Adversarial generation stage: partition seeds by classifier correctness,
//! assemble control-token prompt sequences, decode label-flipped candidates,
//! and filter them into attack records.

mod attack;
mod prompt;

pub use attack::{
    filter_candidates, generate_adversary, records_from_jsonl, records_to_jsonl, AttackMethod,
    AttackRecord, DecodeMeta, GeneratedCandidate,
};
pub use prompt::{
    build_decode_prompt, build_prompt_sequence, build_training_prompt, build_training_prompts,
    parse_prompt_sequence, ParsedPrompt, PromptMode, PromptSequence, SegTag,
};

use std::collections::BTreeMap;

use crate::corpus::{Dataset, Vocab};
use crate::error::{Error, Result};
use crate::nnet::ClassifierModel;
use crate::util::{seeded_rng, uniform_f64};

use serde::{Deserialize, Serialize};

/// Seed data split by classifier behavior: `d1` holds correctly classified
/// examples (the generator's training pool), `d2` the misclassified rest.
#[derive(Debug, Clone)]
pub struct Partition {
    pub d1: Dataset,
    pub d2: Dataset,
    /// Predicted label per example id.
    pub predictions: BTreeMap<String, usize>,
}

/// Splits `data` into correctly and incorrectly classified subsets.
pub fn partition_by_correctness(
    model: &ClassifierModel,
    data: &Dataset,
    vocab: &Vocab,
) -> Partition {
    let mut d1 = Dataset { task: data.task, examples: Vec::new(), label_names: data.label_names.clone() };
    let mut d2 = d1.clone();
    let mut predictions = BTreeMap::new();
    for ex in &data.examples {
        let pred = model.predict(&ex.classifier_input(vocab));
        predictions.insert(ex.id.clone(), pred);
        if pred == ex.gold_label {
            d1.examples.push(ex.clone());
        } else {
            d2.examples.push(ex.clone());
        }
    }
    Partition { d1, d2, predictions }
}

/// How the adversarial target label is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipStrategy {
    /// `y' = 1 − y`; binary tasks only.
    BinaryFlip,
    /// Uniform draw over the other classes.
    UniformOther,
    /// Always the given class.
    FixedTarget(usize),
}

/// Picks the target label `y'`, always different from `y`.
pub fn flip_label(y: usize, num_classes: usize, strategy: FlipStrategy, seed: u64) -> Result<usize> {
    if num_classes < 2 {
        return Err(Error::invalid("num_classes", "need at least 2 classes"));
    }
    if y >= num_classes {
        return Err(Error::TargetOutOfRange { target: y, num_classes });
    }
    match strategy {
        FlipStrategy::BinaryFlip => {
            if num_classes != 2 {
                return Err(Error::BinaryFlipArity { num_classes });
            }
            Ok(1 - y)
        }
        FlipStrategy::UniformOther => {
            let others: Vec<usize> = (0..num_classes).filter(|c| *c != y).collect();
            let mut rng = seeded_rng(seed);
            let pick = (uniform_f64(&mut rng) * others.len() as f64) as usize;
            Ok(others[pick.min(others.len() - 1)])
        }
        FlipStrategy::FixedTarget(t) => {
            if t == y {
                return Err(Error::invalid("fixed_target", "target must differ from y"));
            }
            if t >= num_classes {
                return Err(Error::TargetOutOfRange { target: t, num_classes });
            }
            Ok(t)
        }
    }
}
