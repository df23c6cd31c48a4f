#![allow(dead_code)]

//! Shared fixtures: a synthetic planted-keyword corpus (label = keyword
//! presence) and small trained models for oracle tests.

use advforge::corpus::{build_vocab, tokenize, Dataset, Example, ExampleBody, TaskKind, Vocab};
use advforge::nnet::{train_classifier, ClassifierModel, TrainConfig};
use advforge::util::{seeded_rng, uniform_f64};
use rand_chacha::ChaCha8Rng;

pub const KEYWORD: &str = "trg";

pub const FILLERS: [&str; 20] = [
    "the", "a", "one", "red", "blue", "fast", "slow", "bird", "tree", "song", "day", "night",
    "walk", "ride", "book", "idea", "cold", "warm", "stone", "river",
];

fn pick<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    let i = (uniform_f64(rng) * options.len() as f64) as usize;
    options[i.min(options.len() - 1)]
}

/// One synthetic sentence; positives carry the keyword exactly once.
pub fn planted_sentence(rng: &mut ChaCha8Rng, positive: bool) -> String {
    let len = 5 + (uniform_f64(rng) * 5.0) as usize;
    let mut words: Vec<String> = (0..len).map(|_| pick(rng, &FILLERS).to_string()).collect();
    if positive {
        let at = (uniform_f64(rng) * (len + 1) as f64) as usize;
        words.insert(at.min(len), KEYWORD.to_string());
    }
    words.join(" ")
}

/// Balanced labeled corpus of (text, label) pairs.
pub fn planted_corpus(n: usize, seed: u64) -> Vec<(String, usize)> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|i| {
        let positive = i % 2 == 1;
        (planted_sentence(&mut rng, positive), usize::from(positive))
    }).collect()
}

pub fn label_names() -> Vec<String> {
    vec!["benign".to_string(), "toxic".to_string()]
}

pub fn to_dataset(rows: &[(String, usize)], vocab: &Vocab, prefix: &str) -> Dataset {
    let examples = rows
        .iter()
        .enumerate()
        .map(|(i, (text, label))| Example {
            id: format!("{prefix}-{i}"),
            body: ExampleBody::SingleText(tokenize(text, vocab)),
            gold_label: *label,
        })
        .collect();
    Dataset { task: TaskKind::SingleText, examples, label_names: label_names() }
}

/// Builds vocab + train/dev/test datasets for the planted-keyword task.
pub fn planted_splits(
    n_train: usize,
    n_dev: usize,
    n_test: usize,
    seed: u64,
) -> (Vocab, Dataset, Dataset, Dataset) {
    let train_rows = planted_corpus(n_train, seed);
    let dev_rows = planted_corpus(n_dev, seed.wrapping_add(1));
    let test_rows = planted_corpus(n_test, seed.wrapping_add(2));
    let texts: Vec<String> = train_rows.iter().map(|(t, _)| t.clone()).collect();
    let vocab = build_vocab(&texts, &label_names(), 1).unwrap();
    (
        vocab.clone(),
        to_dataset(&train_rows, &vocab, "train"),
        to_dataset(&dev_rows, &vocab, "dev"),
        to_dataset(&test_rows, &vocab, "test"),
    )
}

/// Trains a small classifier on the planted task; returns everything the
/// oracle tests need. Asserts the dev accuracy the fixtures rely on.
pub fn trained_planted_classifier() -> (ClassifierModel, Vocab, Dataset, Dataset, Dataset) {
    let (vocab, train, dev, test) = planted_splits(240, 60, 120, 400);
    // the artifact's desk recipe: soft enough for tight path-integral quadrature,
    // accurate enough for the keyword oracles
    let model = ClassifierModel::new(vocab.len(), 64, 2, 32, 7);
    let config = TrainConfig {
        learning_rate: 2e-4,
        batch_size: 16,
        max_epochs: 20,
        patience: 8,
        seed: 13,
    };
    let (model, _log) = train_classifier(model, &train, &dev, &vocab, &config).unwrap();
    let acc = advforge::nnet::classifier_accuracy(&model, &dev, &vocab);
    assert!(acc >= 0.95, "planted classifier dev accuracy {acc}");
    (model, vocab, train, dev, test)
}

/// Copy-task prompts: the text segment repeats the two z tokens twice.
pub fn copy_task_prompts(
    vocab: &Vocab,
    n: usize,
    seed: u64,
) -> Vec<advforge::advgen::PromptSequence> {
    use advforge::advgen::build_training_prompt;
    let words: Vec<String> =
        (vocab.num_reserved()..vocab.len()).map(|i| vocab.token(i).unwrap().to_string()).collect();
    let mut rng = seeded_rng(seed);
    let mut prompts = Vec::with_capacity(n);
    for i in 0..n {
        let a = (uniform_f64(&mut rng) * words.len() as f64) as usize % words.len();
        let b = (uniform_f64(&mut rng) * words.len() as f64) as usize % words.len();
        let text = format!("{} {} {} {}", words[a], words[b], words[a], words[b]);
        let ex = Example {
            id: format!("copy-{i}"),
            body: ExampleBody::SingleText(tokenize(&text, vocab)),
            gold_label: i % 2,
        };
        let z = vec![(0, words[a].clone()), (1, words[b].clone())];
        prompts.push(build_training_prompt(&ex, &z, vocab, 64).unwrap());
    }
    prompts
}

/// A generator trained on the copy task; decodes reliably end in EOS.
pub fn trained_copy_generator() -> (advforge::nnet::GeneratorModel, Vocab) {
    use advforge::nnet::{train_generator, GeneratorModel};
    let words: Vec<String> = (0..12).map(|i| format!("tok{i}")).collect();
    let vocab = build_vocab(&[words.join(" ")], &label_names(), 1).unwrap();
    let train = copy_task_prompts(&vocab, 200, 5);
    let dev = copy_task_prompts(&vocab, 40, 6);
    let model = GeneratorModel::new(vocab.len(), 32, 64, 17);
    let config = TrainConfig {
        learning_rate: 2e-3,
        batch_size: 16,
        max_epochs: 60,
        patience: 10,
        seed: 3,
    };
    let (model, _) = train_generator(model, &train, &dev, &config, true).unwrap();
    (model, vocab)
}
