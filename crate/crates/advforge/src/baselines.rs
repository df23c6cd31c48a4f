//! Baseline attacks: deletion-importance word substitution (TextFooler-style)
//! and first-order gradient flips (word-level HotFlip).
//!
//! Both attacks preserve sequence length, never touch special tokens, and for
//! pair tasks perturb only the hypothesis.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::attribution::Predict;
use crate::corpus::{Example, ExampleBody, TokenSequence, Vocab};
use crate::error::{Error, Result};
use crate::nnet::ClassifierModel;
use crate::util::argmax;

/// Attack limits shared by both baselines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackBudget {
    pub max_substitutions: usize,
    pub sim_threshold: f64,
    pub neighbor_count: usize,
}

impl Default for AttackBudget {
    fn default() -> Self {
        AttackBudget { max_substitutions: 3, sim_threshold: 0.5, neighbor_count: 10 }
    }
}

impl AttackBudget {
    pub fn validate(&self) -> Result<()> {
        if self.max_substitutions == 0 {
            return Err(Error::invalid("max_substitutions", "must be >= 1"));
        }
        if self.neighbor_count == 0 {
            return Err(Error::invalid("neighbor_count", "must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome of one baseline attack attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCandidate {
    pub seed_id: String,
    /// The attacked text (hypothesis only, for pair tasks), detokenized.
    pub text: String,
    pub flipped: bool,
    /// No substitution was applied anywhere.
    pub no_op: bool,
    /// Number of black-box prediction calls spent.
    pub queries: usize,
    pub substitutions: usize,
}

/// Positions the attack may touch: inside the attackable region and holding a
/// non-special token.
fn attackable_positions(example: &Example, seq: &TokenSequence, vocab: &Vocab) -> Vec<usize> {
    let start = match &example.body {
        ExampleBody::SingleText(_) => 0,
        ExampleBody::Pair { premise, .. } => premise.len() + 1, // skip premise and <sep>
    };
    (start..seq.len()).filter(|&p| !vocab.is_reserved(seq.ids[p])).collect()
}

/// The attacked portion of the perturbed sequence, as surface text.
fn attacked_text(example: &Example, seq: &TokenSequence) -> String {
    let start = match &example.body {
        ExampleBody::SingleText(_) => 0,
        ExampleBody::Pair { premise, .. } => premise.len() + 1,
    };
    seq.surfaces[start..].join(" ")
}

/// Deletion importance: `predict(S)[y] − predict(S with position i masked)[y]`,
/// one score per position.
pub fn word_importance_by_deletion<P: Predict + ?Sized>(
    predict: &P,
    tokens: &TokenSequence,
    y: usize,
    mask_id: usize,
) -> Vec<f64> {
    let base = predict.predict(tokens)[y];
    let mut masked_batch = Vec::with_capacity(tokens.len());
    for i in 0..tokens.len() {
        let mut m = tokens.clone();
        m.ids[i] = mask_id;
        m.surfaces[i] = "<mask>".into();
        masked_batch.push(m);
    }
    predict.predict_batch(&masked_batch).into_iter().map(|p| base - p[y]).collect()
}

/// L2-normalizes each row; zero rows stay zero.
pub fn normalized_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    out
}

/// Nearest vocabulary neighbors of `token_id` by cosine similarity over
/// row-normalized embeddings. Special tokens and the token itself are excluded;
/// results are (id, similarity) sorted by similarity desc, ties to the lower id.
pub fn nearest_neighbors(
    normalized: &Array2<f64>,
    token_id: usize,
    count: usize,
    sim_threshold: f64,
    num_reserved: usize,
) -> Vec<(usize, f64)> {
    let anchor = normalized.row(token_id);
    let mut sims: Vec<(usize, f64)> = (num_reserved..normalized.nrows())
        .filter(|&id| id != token_id)
        .map(|id| (id, anchor.dot(&normalized.row(id))))
        .filter(|(_, sim)| *sim >= sim_threshold)
        .collect();
    sims.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
    });
    sims.truncate(count);
    sims
}

/// Greedy word substitution: positions in descending deletion importance; at
/// each, the nearest-neighbor replacement that most reduces the gold-class
/// probability is applied (if any reduces it). Stops on a prediction flip or
/// when the substitution budget is spent.
pub fn textfooler_attack<P: Predict + ?Sized>(
    predict: &P,
    example: &Example,
    embeddings: &Array2<f64>,
    vocab: &Vocab,
    budget: &AttackBudget,
    y: usize,
) -> Result<BaselineCandidate> {
    budget.validate()?;
    let seq = example.classifier_input(vocab);
    if seq.is_empty() {
        return Err(Error::invalid("example", "cannot attack an empty sequence"));
    }
    let mut queries = 0usize;

    let importances = word_importance_by_deletion(predict, &seq, y, vocab.mask_id());
    queries += seq.len() + 1;

    let mut order = attackable_positions(example, &seq, vocab);
    order.sort_by(|&a, &b| {
        importances[b]
            .partial_cmp(&importances[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut current = seq.clone();
    let mut p_gold = predict.predict(&current)[y];
    queries += 1;
    let mut substitutions = 0usize;
    let mut flipped = false;

    for pos in order {
        if substitutions >= budget.max_substitutions {
            break;
        }
        let original = current.ids[pos];
        let neighbors = nearest_neighbors(
            embeddings,
            original,
            budget.neighbor_count,
            budget.sim_threshold,
            vocab.num_reserved(),
        );
        if neighbors.is_empty() {
            continue;
        }
        let variants: Vec<TokenSequence> = neighbors
            .iter()
            .map(|(id, _)| {
                let mut v = current.clone();
                v.ids[pos] = *id;
                v.surfaces[pos] = vocab.token(*id).unwrap_or("<unk>").to_string();
                v
            })
            .collect();
        let preds = predict.predict_batch(&variants);
        queries += variants.len();
        let mut best: Option<(usize, f64)> = None; // (variant index, p_gold)
        for (i, p) in preds.iter().enumerate() {
            if best.map_or(true, |(_, bp)| p[y] < bp) {
                best = Some((i, p[y]));
            }
        }
        if let Some((i, p)) = best {
            if p < p_gold {
                current = variants[i].clone();
                p_gold = p;
                substitutions += 1;
                if argmax(&preds[i]) != y {
                    flipped = true;
                    break;
                }
            }
        }
    }

    Ok(BaselineCandidate {
        seed_id: example.id.clone(),
        text: attacked_text(example, &current),
        flipped,
        no_op: substitutions == 0,
        queries,
        substitutions,
    })
}

/// White-box access needed by the gradient flip attack. Implemented by the
/// classifier and by hand-built surrogates in tests.
pub trait WhiteBoxAttackModel {
    /// Token embedding matrix; replacement candidates are its rows.
    fn embedding_matrix(&self) -> &Array2<f64>;
    /// Loss toward the gold label and its gradient w.r.t. the input embeddings.
    fn loss_and_input_grad(&self, ids: &[usize], gold: usize) -> (f64, Array2<f64>);
    fn predict_label(&self, ids: &[usize]) -> usize;
}

impl WhiteBoxAttackModel for ClassifierModel {
    fn embedding_matrix(&self) -> &Array2<f64> {
        self.embedding()
    }

    fn loss_and_input_grad(&self, ids: &[usize], gold: usize) -> (f64, Array2<f64>) {
        let (loss, _, dx) = self.loss_and_grads(ids, gold);
        (loss, dx)
    }

    fn predict_label(&self, ids: &[usize]) -> usize {
        argmax(&self.forward_ids(ids))
    }
}

/// First-order flip scoring: replacement w at position i scores
/// g_i · (e_w − e_i) where g_i is the loss gradient at that embedding. The
/// highest-scoring pair is applied greedily, gradients are recomputed, and the
/// loop stops on a flip or after `max_substitutions`.
pub fn hotflip_attack<M: WhiteBoxAttackModel + ?Sized>(
    model: &M,
    example: &Example,
    vocab: &Vocab,
    budget: &AttackBudget,
    y: usize,
) -> Result<BaselineCandidate> {
    budget.validate()?;
    let seq = example.classifier_input(vocab);
    if seq.is_empty() {
        return Err(Error::invalid("example", "cannot attack an empty sequence"));
    }
    let attackable = attackable_positions(example, &seq, vocab);
    let embed = model.embedding_matrix();
    let num_reserved = vocab.num_reserved();

    let mut current = seq.clone();
    let mut substitutions = 0usize;
    let mut flipped = model.predict_label(&current.ids) != y;

    while !flipped && substitutions < budget.max_substitutions && !attackable.is_empty() {
        let (_, grad) = model.loss_and_input_grad(&current.ids, y);
        // score(i, w) = g_i · e_w − g_i · e_cur(i), all pairs via one product
        let all_scores = grad.dot(&embed.t());
        let mut best: Option<(f64, usize, usize)> = None; // (score, pos, id)
        for &pos in &attackable {
            let self_score = all_scores[(pos, current.ids[pos])];
            for id in num_reserved..embed.nrows() {
                if id == current.ids[pos] {
                    continue;
                }
                let score = all_scores[(pos, id)] - self_score;
                if best.map_or(true, |(bs, _, _)| score > bs) {
                    best = Some((score, pos, id));
                }
            }
        }
        let Some((_, pos, id)) = best else { break };
        current.ids[pos] = id;
        current.surfaces[pos] = vocab.token(id).unwrap_or("<unk>").to_string();
        substitutions += 1;
        flipped = model.predict_label(&current.ids) != y;
    }

    Ok(BaselineCandidate {
        seed_id: example.id.clone(),
        text: attacked_text(example, &current),
        flipped,
        no_op: substitutions == 0,
        queries: 0,
        substitutions,
    })
}
