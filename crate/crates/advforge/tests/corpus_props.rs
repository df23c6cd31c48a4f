//! Corpus invariants: deterministic tokenization, round-trip against the
//! normalized form, and save/load identity on datasets.

use advforge::corpus::{
    build_vocab, detokenize, load_dataset, save_dataset, split_words, tokenize, Dataset, Example,
    ExampleBody, TaskKind,
};
use advforge::util::{seeded_rng, uniform_f64};
use proptest::prelude::*;

#[test]
fn hundred_sentence_round_trip_reproduces_normalized_form() {
    let mut rng = seeded_rng(88);
    let words = ["Apple", "bat", "CAR", "dog", "Echo", "fig", "GNU", "hat"];
    let puncts = [",", ".", "!", "?", ";"];
    let labels: Vec<String> = vec!["neg".into(), "pos".into()];
    let vocab = build_vocab(&["apple bat car dog echo fig gnu hat".into()], &labels, 1).unwrap();

    for _ in 0..100 {
        let len = 3 + (uniform_f64(&mut rng) * 10.0) as usize;
        let mut sentence = String::new();
        for i in 0..len {
            if i > 0 {
                // occasionally multiple spaces
                sentence.push(' ');
                if uniform_f64(&mut rng) < 0.2 {
                    sentence.push(' ');
                }
            }
            let w = words[(uniform_f64(&mut rng) * words.len() as f64) as usize % words.len()];
            sentence.push_str(w);
            if uniform_f64(&mut rng) < 0.3 {
                let p = puncts[(uniform_f64(&mut rng) * puncts.len() as f64) as usize % puncts.len()];
                sentence.push_str(p);
            }
        }
        let normalized = split_words(&sentence).join(" ");
        let round_trip = detokenize(&tokenize(&sentence, &vocab));
        assert_eq!(round_trip, normalized, "input: {sentence:?}");
    }
}

proptest! {
    #[test]
    fn tokenize_is_deterministic_and_idempotent(text in "[ a-zA-Z0-9,.!?']{0,60}") {
        let labels: Vec<String> = vec!["neg".into(), "pos".into()];
        let vocab = build_vocab(&["seed words only".into()], &labels, 1).unwrap();
        let once = tokenize(&text, &vocab);
        let again = tokenize(&text, &vocab);
        prop_assert_eq!(&once, &again);
        // idempotent on already-normalized text
        let renorm = tokenize(&detokenize(&once), &vocab);
        prop_assert_eq!(&once, &renorm);
    }

    #[test]
    fn vocab_ids_are_stable_under_record_permutation(
        words in proptest::collection::vec("[a-z]{1,5}", 1..30),
        rotate in 0usize..29,
    ) {
        let labels: Vec<String> = vec!["neg".into(), "pos".into()];
        let records: Vec<String> = words.chunks(3).map(|c| c.join(" ")).collect();
        let mut rotated = records.clone();
        let r = rotate % records.len().max(1);
        rotated.rotate_left(r);
        let a = build_vocab(&records, &labels, 1).unwrap();
        let b = build_vocab(&rotated, &labels, 1).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn dataset_save_load_identity_on_synthetic_pairs() {
    let labels: Vec<String> =
        vec!["contradiction".into(), "neutral".into(), "entailment".into()];
    let vocab = build_vocab(&["the cat dog is red blue not".into()], &labels, 1).unwrap();
    let examples = vec![
        Example {
            id: "p0".into(),
            body: ExampleBody::Pair {
                premise: tokenize("the cat is red", &vocab),
                hypothesis: tokenize("the cat is not red", &vocab),
            },
            gold_label: 0,
        },
        Example {
            id: "p1".into(),
            body: ExampleBody::Pair {
                premise: tokenize("the dog is blue", &vocab),
                hypothesis: tokenize("the dog is blue", &vocab),
            },
            gold_label: 2,
        },
    ];
    let ds = Dataset { task: TaskKind::Pair, examples, label_names: labels.clone() };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.jsonl");
    save_dataset(&ds, &path).unwrap();
    let loaded = load_dataset(&path, TaskKind::Pair, &labels, &vocab).unwrap();
    assert_eq!(ds, loaded);
}
