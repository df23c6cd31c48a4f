//! Training-loop oracles: determinism, memorization capacity, the planted
//! keyword dataset, and the copy-task generator.

mod common;

use advforge::corpus::{build_vocab, tokenize, Dataset, Example, ExampleBody, TaskKind};
use advforge::nnet::{
    decode_topk, train_classifier, train_generator, ClassifierModel, DecodeConfig, DecodeStrategy,
    GeneratorModel, TrainConfig,
};

fn tiny_config(lr: f64, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig { learning_rate: lr, batch_size: 8, max_epochs: epochs, patience: epochs, seed }
}

#[test]
fn classifier_memorizes_a_single_example() {
    let labels: Vec<String> = vec!["neg".into(), "pos".into()];
    let vocab = build_vocab(&["aa bb cc".into()], &labels, 1).unwrap();
    let one = Dataset {
        task: TaskKind::SingleText,
        examples: vec![Example {
            id: "only".into(),
            body: ExampleBody::SingleText(tokenize("aa bb cc", &vocab)),
            gold_label: 1,
        }],
        label_names: labels,
    };
    let model = ClassifierModel::new(vocab.len(), 16, 2, 16, 3);
    let (model, log) =
        train_classifier(model, &one, &one, &vocab, &tiny_config(1e-2, 300, 5)).unwrap();
    let final_loss = log.last().unwrap().train_loss;
    assert!(final_loss <= 0.01, "memorization loss {final_loss}");
    let probs = model.forward(&one.examples[0].classifier_input(&vocab));
    assert!(probs[1] > 0.95);
}

#[test]
fn same_seed_gives_bitwise_identical_classifiers() {
    let (vocab, train, dev, _) = common::planted_splits(60, 20, 10, 42);
    let run = || {
        let model = ClassifierModel::new(vocab.len(), 16, 2, 32, 9);
        train_classifier(model, &train, &dev, &vocab, &tiny_config(1e-3, 8, 21)).unwrap().0
    };
    let a = run();
    let b = run();
    for (pa, pb) in a.params().iter().zip(b.params()) {
        for (x, y) in pa.iter().zip(pb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn planted_keyword_classifier_reaches_dev_accuracy() {
    // also exercised by common::trained_planted_classifier, which asserts >= 0.95
    let (_, _, dev, _test) = common::planted_splits(240, 60, 10, 400);
    assert_eq!(dev.len(), 60);
    let (model, vocab, _, dev, _) = common::trained_planted_classifier();
    let acc = advforge::nnet::classifier_accuracy(&model, &dev, &vocab);
    assert!(acc >= 0.95, "dev accuracy {acc}");
}

#[test]
fn diverged_training_reports_the_epoch() {
    // a NaN parameter poisons the forward pass on the first epoch
    let (vocab, train, dev, _) = common::planted_splits(40, 10, 10, 77);
    let mut model = ClassifierModel::new(vocab.len(), 16, 2, 32, 1);
    model.params_mut()[1][(0, 0)] = f64::NAN;
    match train_classifier(model, &train, &dev, &vocab, &tiny_config(1e-3, 30, 2)) {
        Err(advforge::Error::Diverged { epoch }) => assert_eq!(epoch, 0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

use common::copy_task_prompts;

#[test]
fn copy_task_generator_reproduces_z_tokens() {
    let labels: Vec<String> = vec!["neg".into(), "pos".into()];
    let words: Vec<String> = (0..12).map(|i| format!("tok{i}")).collect();
    let vocab = build_vocab(&[words.join(" ")], &labels, 1).unwrap();
    let train = copy_task_prompts(&vocab, 200, 5);
    let dev = copy_task_prompts(&vocab, 40, 6);

    let model = GeneratorModel::new(vocab.len(), 32, 64, 17);
    let config = TrainConfig { learning_rate: 2e-3, batch_size: 16, max_epochs: 60, patience: 10, seed: 3 };
    let (model, log) = train_generator(model, &train, &dev, &config, true).unwrap();

    // optimizer sanity: best dev loss no worse than the first epoch's
    let first_dev = log.first().unwrap().dev_loss;
    let best_dev = log.iter().map(|l| l.dev_loss).fold(f64::INFINITY, f64::min);
    assert!(best_dev <= first_dev, "dev {best_dev} vs epoch0 {first_dev}");

    // decode 100 fresh prompts; at least 80 must contain one of their z tokens
    let probes = copy_task_prompts(&vocab, 100, 99);
    let mut hits = 0;
    for (i, full) in probes.iter().enumerate() {
        // decode prefix: everything up to and including the text marker
        let text_pos = full.ids.iter().position(|&id| id == vocab.text_id()).unwrap();
        let prefix = &full.ids[..=text_pos];
        let cfg = DecodeConfig {
            strategy: DecodeStrategy::Topk,
            k: 3,
            beam_size: 1,
            max_len: prefix.len() + 8,
            seed: 1000 + i as u64,
        };
        let out = decode_topk(&model, prefix, vocab.eos_id(), &cfg).unwrap();
        let continuation = &out[prefix.len()..];
        let z_ids = [full.ids[1], full.ids[2]];
        if continuation.iter().any(|id| z_ids.contains(id)) {
            hits += 1;
        }
    }
    assert!(hits >= 80, "copy-task hits {hits}/100");
}

#[test]
fn generator_training_is_deterministic() {
    let labels: Vec<String> = vec!["neg".into(), "pos".into()];
    let words: Vec<String> = (0..8).map(|i| format!("tok{i}")).collect();
    let vocab = build_vocab(&[words.join(" ")], &labels, 1).unwrap();
    let train = copy_task_prompts(&vocab, 40, 5);
    let dev = copy_task_prompts(&vocab, 10, 6);
    let run = || {
        let model = GeneratorModel::new(vocab.len(), 16, 64, 8);
        train_generator(model, &train, &dev, &tiny_config(1e-3, 6, 31), true).unwrap().0
    };
    let a = run();
    let b = run();
    for (pa, pb) in a.params().iter().zip(b.params()) {
        for (x, y) in pa.iter().zip(pb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn overlong_prompt_is_rejected_with_its_id() {
    let labels: Vec<String> = vec!["neg".into(), "pos".into()];
    let words: Vec<String> = (0..8).map(|i| format!("tok{i}")).collect();
    let vocab = build_vocab(&[words.join(" ")], &labels, 1).unwrap();
    let train = copy_task_prompts(&vocab, 10, 5);
    let dev = copy_task_prompts(&vocab, 5, 6);
    // a model whose context is too small for the prompts
    let model = GeneratorModel::new(vocab.len(), 16, 6, 8);
    let err = train_generator(model, &train, &dev, &tiny_config(1e-3, 2, 1), true).unwrap_err();
    assert!(err.to_string().contains("copy-0"), "{err}");
}
