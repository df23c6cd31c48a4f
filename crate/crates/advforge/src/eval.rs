//! Metrics: attack success rates, macro F1, the out-of-distribution finetuning
//! experiment, and a Fleiss' kappa utility for external annotation files.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::advgen::AttackRecord;
use crate::corpus::{tokenize, Dataset, Vocab};
use crate::error::{Error, Result};
use crate::nnet::{Adam, ClassifierModel, TrainConfig};
use crate::util::{argmax, seeded_rng};

/// Summary of one evaluation run, serialized as a single JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub adv1_rate: Option<f64>,
    pub adv2_rate: Option<f64>,
    pub n: usize,
    pub macro_f1_before: Option<f64>,
    pub macro_f1_after: Option<f64>,
    pub notes: String,
}

/// Rebuilds each record's classifier input from its surface text.
fn record_input(record: &AttackRecord, vocab: &Vocab) -> crate::corpus::TokenSequence {
    match &record.premise {
        None => tokenize(&record.generated, vocab),
        Some(premise) => {
            let mut seq = tokenize(premise, vocab);
            seq.push(vocab.sep_id(), "<sep>");
            let hyp = tokenize(&record.generated, vocab);
            seq.ids.extend_from_slice(&hyp.ids);
            seq.surfaces.extend_from_slice(&hyp.surfaces);
            seq
        }
    }
}

/// Percentage of records whose generated text steers `model` to the target
/// label. Scoring a transfer model gives the unseen-classifier rate by the
/// same formula.
pub fn attack_success_rate(
    records: &[AttackRecord],
    model: &ClassifierModel,
    vocab: &Vocab,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let hits = records
        .iter()
        .filter(|r| argmax(&model.forward(&record_input(r, vocab))) == r.y_prime)
        .count();
    Ok(100.0 * hits as f64 / records.len() as f64)
}

/// Unweighted mean of per-class F1. A class absent from both predictions and
/// golds contributes an F1 of 0.
pub fn macro_f1(preds: &[usize], golds: &[usize], num_classes: usize) -> Result<f64> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: golds.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut total = 0.0;
    for class in 0..num_classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (&p, &g) in preds.iter().zip(golds) {
            match (p == class, g == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        if denom > 0 {
            total += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(total / num_classes as f64)
}

fn dataset_predictions(model: &ClassifierModel, data: &Dataset, vocab: &Vocab) -> (Vec<usize>, Vec<usize>) {
    let preds = data
        .examples
        .iter()
        .map(|e| argmax(&model.forward(&e.classifier_input(vocab))))
        .collect();
    let golds = data.examples.iter().map(|e| e.gold_label).collect();
    (preds, golds)
}

/// Few-shot domain adaptation: finetunes a copy of the classifier on the first
/// `n` adversarial examples and reports challenge-set macro F1 before and
/// after. The input model is never mutated. A zero learning rate is allowed
/// (useful as a no-op control).
pub fn ood_finetune(
    model: &ClassifierModel,
    adversarial_set: &Dataset,
    eval_set: &Dataset,
    vocab: &Vocab,
    config: &TrainConfig,
    n: usize,
    method: &str,
) -> Result<(EvalReport, ClassifierModel)> {
    if adversarial_set.len() < n {
        return Err(Error::invalid(
            "n",
            format!("adversarial set has {} examples, need {n}", adversarial_set.len()),
        ));
    }
    if config.learning_rate < 0.0 {
        return Err(Error::invalid("learning_rate", "must be >= 0"));
    }
    let mut notes = Vec::new();
    let subset = &adversarial_set.examples[..n];
    let eval_ids: std::collections::BTreeSet<&str> =
        eval_set.examples.iter().map(|e| e.id.as_str()).collect();
    if subset.iter().any(|e| eval_ids.contains(e.id.as_str())) {
        notes.push("warning: adversarial set overlaps the evaluation set".to_string());
    }

    let (preds, golds) = dataset_predictions(model, eval_set, vocab);
    let before = macro_f1(&preds, &golds, eval_set.num_classes())?;

    let mut tuned = model.clone();
    let inputs: Vec<(Vec<usize>, usize)> =
        subset.iter().map(|e| (e.classifier_input(vocab).ids, e.gold_label)).collect();
    let mut opt = Adam::new(config.learning_rate, tuned.params());
    let mut rng = seeded_rng(config.seed);
    for _ in 0..config.max_epochs {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let mut grads: Vec<Array2<f64>> =
                tuned.params().iter().map(|p| Array2::zeros(p.raw_dim())).collect();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (ids, gold) = &inputs[i];
                let (_, g, _) = tuned.loss_and_grads(ids, *gold);
                for (acc, gi) in grads.iter_mut().zip(&g) {
                    acc.scaled_add(scale, gi);
                }
            }
            opt.step(tuned.params_mut(), &grads);
        }
    }

    let (preds, golds) = dataset_predictions(&tuned, eval_set, vocab);
    let after = macro_f1(&preds, &golds, eval_set.num_classes())?;

    let report = EvalReport {
        method: method.to_string(),
        adv1_rate: None,
        adv2_rate: None,
        n,
        macro_f1_before: Some(before),
        macro_f1_after: Some(after),
        notes: notes.join("; "),
    };
    Ok((report, tuned))
}

/// Rater counts per item: rows are items, columns are categories, each row sums
/// to the (constant) number of raters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationTable {
    counts: Vec<Vec<u64>>,
}

impl AnnotationTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.is_empty() || counts[0].is_empty() {
            return Err(Error::invalid("counts", "table must be non-empty"));
        }
        let width = counts[0].len();
        let raters: u64 = counts[0].iter().sum();
        if raters < 2 {
            return Err(Error::invalid("counts", "need at least 2 raters per item"));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != width {
                return Err(Error::invalid("counts", format!("row {i} has ragged width")));
            }
            if row.iter().sum::<u64>() != raters {
                return Err(Error::invalid("counts", format!("row {i} has a different rater count")));
            }
        }
        Ok(AnnotationTable { counts })
    }

    /// Reads a headerless CSV of integer counts (rows = items, columns = categories).
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
        let mut counts = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row: std::result::Result<Vec<u64>, _> =
                record.iter().map(|f| f.trim().parse::<u64>()).collect();
            counts.push(row.map_err(|e| Error::invalid("counts", e.to_string()))?);
        }
        AnnotationTable::new(counts)
    }

    pub fn n_items(&self) -> usize {
        self.counts.len()
    }

    pub fn n_raters(&self) -> u64 {
        self.counts[0].iter().sum()
    }
}

/// Fleiss' kappa: (P̄ − P̄ₑ) / (1 − P̄ₑ) with per-item agreement P̄ and marginal
/// chance agreement P̄ₑ. Exactly 1.0 on perfect agreement; when every rating in
/// the table lands in one category (P̄ₑ = 1) the statistic degenerates and is
/// defined as 1.0 only for perfect agreement.
pub fn fleiss_kappa(table: &AnnotationTable) -> Result<f64> {
    let n_items = table.n_items() as f64;
    let raters = table.n_raters() as f64;
    let n_cats = table.counts[0].len();

    let mut p_bar = 0.0;
    let mut marginals = vec![0.0f64; n_cats];
    for row in &table.counts {
        let mut agree = 0.0;
        for (j, &c) in row.iter().enumerate() {
            let c = c as f64;
            agree += c * c;
            marginals[j] += c;
        }
        p_bar += (agree - raters) / (raters * (raters - 1.0));
    }
    p_bar /= n_items;
    let total = n_items * raters;
    let p_e: f64 = marginals.iter().map(|m| (m / total).powi(2)).sum();

    if (1.0 - p_e).abs() < 1e-12 {
        if (p_bar - 1.0).abs() < 1e-12 {
            return Ok(1.0);
        }
        return Err(Error::DegenerateMarginals);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_give_macro_one() {
        let labels = vec![0, 1, 2, 1, 0, 2];
        assert_eq!(macro_f1(&labels, &labels, 3).unwrap(), 1.0);
    }

    #[test]
    fn all_zero_predictions_on_balanced_binary() {
        let preds = vec![0, 0, 0, 0];
        let golds = vec![0, 0, 1, 1];
        let f1 = macro_f1(&preds, &golds, 2).unwrap();
        assert!((f1 - 1.0 / 3.0).abs() < 1e-12, "{f1}");
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(macro_f1(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn macro_f1_matches_confusion_matrix_recomputation() {
        // independent oracle: build the confusion matrix, derive per-class F1
        let mut rng = seeded_rng(17);
        let n = 1000;
        let classes = 4usize;
        let preds: Vec<usize> =
            (0..n).map(|_| (crate::util::uniform_f64(&mut rng) * classes as f64) as usize).collect();
        let golds: Vec<usize> =
            (0..n).map(|_| (crate::util::uniform_f64(&mut rng) * classes as f64) as usize).collect();
        let fast = macro_f1(&preds, &golds, classes).unwrap();

        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&p, &g) in preds.iter().zip(&golds) {
            confusion[g][p] += 1;
        }
        let mut total = 0.0;
        for c in 0..classes {
            let tp = confusion[c][c];
            let fp: usize = (0..classes).filter(|&g| g != c).map(|g| confusion[g][c]).sum();
            let fn_: usize = (0..classes).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
            let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
            let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
            if precision + recall > 0.0 {
                total += 2.0 * precision * recall / (precision + recall);
            }
        }
        let slow = total / classes as f64;
        assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
    }

    proptest::proptest! {
        #[test]
        fn macro_f1_is_permutation_invariant(
            pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..50),
            seed in 0u64..1000,
        ) {
            let preds: Vec<usize> = pairs.iter().map(|(p, _)| *p).collect();
            let golds: Vec<usize> = pairs.iter().map(|(_, g)| *g).collect();
            let base = macro_f1(&preds, &golds, 3).unwrap();

            use rand::seq::SliceRandom;
            let mut rng = seeded_rng(seed);
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut rng);
            let p2: Vec<usize> = order.iter().map(|&i| preds[i]).collect();
            let g2: Vec<usize> = order.iter().map(|&i| golds[i]).collect();
            let shuffled = macro_f1(&p2, &g2, 3).unwrap();
            proptest::prop_assert!((base - shuffled).abs() < 1e-12);
        }
    }

    #[test]
    fn fleiss_kappa_perfect_agreement_is_one() {
        // two categories both in use, raters always unanimous
        let table = AnnotationTable::new(vec![vec![3, 0], vec![0, 3], vec![3, 0]]).unwrap();
        assert_eq!(fleiss_kappa(&table).unwrap(), 1.0);
    }

    #[test]
    fn fleiss_kappa_split_votes_give_minus_one() {
        let table = AnnotationTable::new(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(fleiss_kappa(&table).unwrap(), -1.0);
    }

    #[test]
    fn fleiss_kappa_is_row_permutation_invariant() {
        let a = AnnotationTable::new(vec![vec![2, 1], vec![0, 3], vec![3, 0]]).unwrap();
        let b = AnnotationTable::new(vec![vec![3, 0], vec![2, 1], vec![0, 3]]).unwrap();
        assert_eq!(fleiss_kappa(&a).unwrap(), fleiss_kappa(&b).unwrap());
    }

    #[test]
    fn single_category_unanimity_is_defined_as_one() {
        let table = AnnotationTable::new(vec![vec![3, 0], vec![3, 0]]).unwrap();
        assert_eq!(fleiss_kappa(&table).unwrap(), 1.0);
    }

    #[test]
    fn ragged_or_inconsistent_tables_are_rejected() {
        assert!(AnnotationTable::new(vec![vec![2, 1], vec![1, 1]]).is_err());
        assert!(AnnotationTable::new(vec![vec![1, 0]]).is_err());
        assert!(AnnotationTable::new(vec![]).is_err());
    }
}
