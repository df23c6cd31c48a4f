//! Attribution oracles on the trained planted-keyword classifier: the
//! completeness axiom for integrated gradients, keyword-ranking agreement for
//! both backends, and LIME's local fidelity.

mod common;

use advforge::attribution::{
    ig_attribute, lime_attribute, lime_attribute_with_fit, select_influential, IgConfig,
    LimeConfig, SelectStrategy,
};
use advforge::corpus::ExampleBody;
use advforge::util::argmax;

fn lime_config(seed: u64) -> LimeConfig {
    LimeConfig { n_samples: 2000, max_features: 20, seed, ..LimeConfig::default() }
}

#[test]
fn ig_completeness_tightens_with_more_steps() {
    let (model, vocab, _, _, test) = common::trained_planted_classifier();
    let steps_grid = [8usize, 64, 256];
    let mut total_err = [0.0f64; 3];
    let mut checked = 0;

    for ex in test.examples.iter().take(20) {
        let tokens = ex.classifier_input(&vocab);
        let target = argmax(&model.forward(&tokens));
        let x = model.embed_ids(&tokens.ids);
        let baseline = model.embed_ids(&vec![0usize; tokens.len()]);
        let f_x = model.prob_grad_embeddings(&x, target).unwrap().0;
        let f_b = model.prob_grad_embeddings(&baseline, target).unwrap().0;
        let expected = f_x - f_b;

        for (slot, &steps) in steps_grid.iter().enumerate() {
            let map =
                ig_attribute(&model, &tokens, &ex.id, &IgConfig { steps, target_class: target })
                    .unwrap();
            let err = (map.scores.iter().sum::<f64>() - expected).abs();
            total_err[slot] += err;
            if steps == 256 {
                assert!(err <= 1e-3, "example {} completeness error {err}", ex.id);
            }
        }
        checked += 1;
    }
    assert_eq!(checked, 20);
    assert!(
        total_err[2] <= total_err[1] && total_err[1] <= total_err[0],
        "mean completeness error must shrink with steps: {total_err:?}"
    );
}

#[test]
fn both_backends_rank_the_planted_keyword_first() {
    let (model, vocab, _, _, test) = common::trained_planted_classifier();
    let keyword_id = vocab.id_of(common::KEYWORD).unwrap();

    let mut positives = 0usize;
    let mut ig_hits = 0usize;
    let mut lime_hits = 0usize;
    for (i, ex) in test.examples.iter().filter(|e| e.gold_label == 1).enumerate() {
        let tokens = ex.classifier_input(&vocab);
        let key_pos = tokens.ids.iter().position(|&id| id == keyword_id).unwrap();
        let target = argmax(&model.forward(&tokens));
        if target != 1 {
            continue; // only probe the classifier where it sees the keyword class
        }
        positives += 1;

        let ig = ig_attribute(&model, &tokens, &ex.id, &IgConfig { steps: 64, target_class: target })
            .unwrap();
        if argmax(&ig.scores) == key_pos {
            ig_hits += 1;
        }
        let lime =
            lime_attribute(&model, &tokens, target, &ex.id, &lime_config(9000 + i as u64)).unwrap();
        if argmax(&lime.scores) == key_pos {
            lime_hits += 1;
        }
    }
    assert!(positives >= 40, "need enough positive test examples, got {positives}");
    let ig_rate = ig_hits as f64 / positives as f64;
    let lime_rate = lime_hits as f64 / positives as f64;
    assert!(ig_rate >= 0.95, "IG top-1 rate {ig_rate}");
    assert!(lime_rate >= 0.95, "LIME top-1 rate {lime_rate}");
}

#[test]
fn lime_surrogate_is_locally_faithful() {
    let (model, vocab, _, _, test) = common::trained_planted_classifier();
    let ex = test.examples.iter().find(|e| e.gold_label == 1).unwrap();
    let tokens = ex.classifier_input(&vocab);
    let target = argmax(&model.forward(&tokens));
    let fit = lime_attribute_with_fit(&model, &tokens, target, &ex.id, &lime_config(4242)).unwrap();
    assert!(fit.weighted_r2 >= 0.7, "weighted R² {}", fit.weighted_r2);
}

#[test]
fn selection_returns_keyword_for_positive_examples() {
    let (model, vocab, _, _, test) = common::trained_planted_classifier();
    let keyword_id = vocab.id_of(common::KEYWORD).unwrap();
    let ex = test.examples.iter().find(|e| e.gold_label == 1).unwrap();
    let tokens = ex.classifier_input(&vocab);
    let target = argmax(&model.forward(&tokens));
    let map =
        ig_attribute(&model, &tokens, &ex.id, &IgConfig { steps: 64, target_class: target }).unwrap();
    let z =
        select_influential(&map, &tokens, &vocab, 0.2, SelectStrategy::Topk, 0, false).unwrap();
    assert!(z.iter().any(|(p, _)| tokens.ids[*p] == keyword_id), "z misses the keyword: {z:?}");
    match &ex.body {
        ExampleBody::SingleText(t) => assert!(!t.is_empty()),
        ExampleBody::Pair { .. } => unreachable!(),
    }
}
