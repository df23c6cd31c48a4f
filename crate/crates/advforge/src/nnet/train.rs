//! Training loops with Adam, seeded shuffling, and early stopping on dev loss.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::advgen::PromptSequence;
use crate::corpus::{Dataset, Vocab};
use crate::error::{Error, Result};
use crate::util::seeded_rng;

use super::{Adam, ClassifierModel, GeneratorModel, LossMask};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without dev-loss improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 2e-4, batch_size: 16, max_epochs: 50, patience: 5, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be > 0"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs", "must be >= 1"));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

fn shuffled_indices(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

fn zeros_like(params: &[Array2<f64>]) -> Vec<Array2<f64>> {
    params.iter().map(|p| Array2::zeros(p.raw_dim())).collect()
}

fn add_scaled(acc: &mut [Array2<f64>], grads: &[Array2<f64>], scale: f64) {
    for (a, g) in acc.iter_mut().zip(grads) {
        a.scaled_add(scale, g);
    }
}

/// Trains the classifier with cross-entropy, returning the best-dev-loss
/// checkpoint and the per-epoch loss log. Deterministic given the seed.
pub fn train_classifier(
    mut model: ClassifierModel,
    train: &Dataset,
    dev: &Dataset,
    vocab: &Vocab,
    config: &TrainConfig,
) -> Result<(ClassifierModel, Vec<EpochLog>)> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::invalid("dataset", "train and dev must be non-empty"));
    }
    if train.num_classes() != dev.num_classes() {
        return Err(Error::LengthMismatch { left: train.num_classes(), right: dev.num_classes() });
    }
    let inputs: Vec<(Vec<usize>, usize)> = train
        .examples
        .iter()
        .map(|e| (e.classifier_input(vocab).ids, e.gold_label))
        .collect();
    let dev_inputs: Vec<(Vec<usize>, usize)> =
        dev.examples.iter().map(|e| (e.classifier_input(vocab).ids, e.gold_label)).collect();

    let mut opt = Adam::new(config.learning_rate, model.params());
    let mut rng = seeded_rng(config.seed);
    let mut log = Vec::new();
    let mut best_params: Vec<Array2<f64>> = model.params().to_vec();
    let mut best_dev = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..config.max_epochs {
        let order = shuffled_indices(inputs.len(), &mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut grads = zeros_like(model.params());
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (ids, gold) = &inputs[i];
                let (loss, g, _) = model.loss_and_grads(ids, *gold);
                epoch_loss += loss;
                add_scaled(&mut grads, &g, scale);
            }
            opt.step(model.params_mut(), &grads);
        }
        let train_loss = epoch_loss / inputs.len() as f64;
        if !train_loss.is_finite() || !model.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let dev_loss = classifier_dataset_loss(&model, &dev_inputs);
        log.push(EpochLog { epoch, train_loss, dev_loss });
        if dev_loss < best_dev {
            best_dev = dev_loss;
            best_params = model.params().to_vec();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    for (p, best) in model.params_mut().iter_mut().zip(best_params) {
        *p = best;
    }
    Ok((model, log))
}

/// Mean cross-entropy of the classifier over (ids, gold) pairs.
pub fn classifier_dataset_loss(model: &ClassifierModel, inputs: &[(Vec<usize>, usize)]) -> f64 {
    let mut total = 0.0;
    for (ids, gold) in inputs {
        let probs = model.forward_ids(ids);
        total -= probs[*gold].max(1e-300).ln();
    }
    total / inputs.len() as f64
}

/// Accuracy of the classifier over a dataset.
pub fn classifier_accuracy(model: &ClassifierModel, data: &Dataset, vocab: &Vocab) -> f64 {
    let mut hits = 0usize;
    for e in &data.examples {
        let probs = model.forward(&e.classifier_input(vocab));
        if crate::util::argmax(&probs) == e.gold_label {
            hits += 1;
        }
    }
    hits as f64 / data.len() as f64
}

/// Trains the generator on prompt sequences, minimizing next-token cross-entropy
/// over the full sequence (or over S and EOS only when `loss_on_prompt` is false).
/// Early-stops on dev loss; deterministic given the seed.
pub fn train_generator(
    mut model: GeneratorModel,
    prompts: &[PromptSequence],
    dev_prompts: &[PromptSequence],
    config: &TrainConfig,
    loss_on_prompt: bool,
) -> Result<(GeneratorModel, Vec<EpochLog>)> {
    config.validate()?;
    if prompts.is_empty() || dev_prompts.is_empty() {
        return Err(Error::invalid("prompts", "train and dev prompt lists must be non-empty"));
    }
    for p in prompts.iter().chain(dev_prompts) {
        if p.ids.len() > model.max_ctx {
            return Err(Error::SequenceTooLong {
                id: p.source_example.clone(),
                len: p.ids.len(),
                max: model.max_ctx,
            });
        }
    }
    let masks: Vec<Option<Vec<bool>>> =
        prompts.iter().map(|p| loss_mask_for(p, loss_on_prompt)).collect();
    let dev_masks: Vec<Option<Vec<bool>>> =
        dev_prompts.iter().map(|p| loss_mask_for(p, loss_on_prompt)).collect();

    let mut opt = Adam::new(config.learning_rate, model.params());
    let mut rng = seeded_rng(config.seed);
    let mut log = Vec::new();
    let mut best_params: Vec<Array2<f64>> = model.params().to_vec();
    let mut best_dev = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..config.max_epochs {
        let order = shuffled_indices(prompts.len(), &mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut grads = zeros_like(model.params());
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let mask = match &masks[i] {
                    Some(m) => LossMask::Targets(m),
                    None => LossMask::All,
                };
                let (loss, g) = model.loss_and_grads(&prompts[i].ids, mask)?;
                epoch_loss += loss;
                add_scaled(&mut grads, &g, scale);
            }
            opt.step(model.params_mut(), &grads);
        }
        let train_loss = epoch_loss / prompts.len() as f64;
        if !train_loss.is_finite() || !model.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let dev_loss = generator_dataset_loss(&model, dev_prompts, &dev_masks)?;
        log.push(EpochLog { epoch, train_loss, dev_loss });
        if dev_loss < best_dev {
            best_dev = dev_loss;
            best_params = model.params().to_vec();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    for (p, best) in model.params_mut().iter_mut().zip(best_params) {
        *p = best;
    }
    Ok((model, log))
}

fn loss_mask_for(prompt: &PromptSequence, loss_on_prompt: bool) -> Option<Vec<bool>> {
    if loss_on_prompt {
        None
    } else {
        Some(prompt.text_targets())
    }
}

/// Mean masked LM loss over a prompt list.
pub fn generator_dataset_loss(
    model: &GeneratorModel,
    prompts: &[PromptSequence],
    masks: &[Option<Vec<bool>>],
) -> Result<f64> {
    let mut total = 0.0;
    for (p, m) in prompts.iter().zip(masks) {
        let mask = match m {
            Some(m) => LossMask::Targets(m),
            None => LossMask::All,
        };
        total += model.lm_loss_masked(&p.ids, mask)?;
    }
    Ok(total / prompts.len() as f64)
}
