//! Single-head attention text classifier with analytic gradients.

use ndarray::{s, Array1, Array2, Axis};

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};
use crate::util::{argmax, seeded_rng, softmax_inplace};

use super::{init_matrix, softmax_rows_backward, INIT_STD};

const EMBED: usize = 0;
const WQ: usize = 1;
const WK: usize = 2;
const WV: usize = 3;
const W_HEAD: usize = 4;
const B_HEAD: usize = 5;

pub(crate) const CLASSIFIER_PARAM_NAMES: [&str; 6] =
    ["embed", "wq", "wk", "wv", "w_head", "b_head"];

/// Gradients in the same order as [`ClassifierModel::params`].
pub type ClassifierGrads = Vec<Array2<f64>>;

/// Token embeddings, one self-attention layer, mean pooling, linear head.
///
/// Empty inputs are classified from a single padding token; inputs longer than
/// `max_len` are truncated to their first `max_len` tokens.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub vocab_size: usize,
    pub dim: usize,
    pub num_classes: usize,
    pub max_len: usize,
    params: Vec<Array2<f64>>,
}

/// Forward-pass intermediates kept for the backward pass.
pub struct ClassifierCache {
    pub ids: Option<Vec<usize>>,
    pub x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
    pooled: Array1<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ClassifierModel {
    pub fn new(vocab_size: usize, dim: usize, num_classes: usize, max_len: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let params = vec![
            init_matrix(&mut rng, vocab_size, dim, INIT_STD),
            init_matrix(&mut rng, dim, dim, INIT_STD),
            init_matrix(&mut rng, dim, dim, INIT_STD),
            init_matrix(&mut rng, dim, dim, INIT_STD),
            init_matrix(&mut rng, dim, num_classes, INIT_STD),
            Array2::zeros((1, num_classes)),
        ];
        ClassifierModel { vocab_size, dim, num_classes, max_len, params }
    }

    pub(crate) fn from_params(
        vocab_size: usize,
        dim: usize,
        num_classes: usize,
        max_len: usize,
        params: Vec<Array2<f64>>,
    ) -> Self {
        ClassifierModel { vocab_size, dim, num_classes, max_len, params }
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn param_names() -> &'static [&'static str] {
        &CLASSIFIER_PARAM_NAMES
    }

    pub fn embedding(&self) -> &Array2<f64> {
        &self.params[EMBED]
    }

    /// All parameters are finite (no NaN/Inf).
    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Applies the degenerate-input and truncation policy: empty input becomes a
    /// single PAD (id 0); longer-than-`max_len` input keeps its first `max_len` ids.
    pub fn prepare_ids(&self, ids: &[usize]) -> Vec<usize> {
        if ids.is_empty() {
            return vec![0];
        }
        ids.iter().copied().take(self.max_len).collect()
    }

    /// Embedding rows for a prepared id sequence.
    pub fn embed_ids(&self, ids: &[usize]) -> Array2<f64> {
        let mut x = Array2::zeros((ids.len(), self.dim));
        for (row, &id) in ids.iter().enumerate() {
            assert!(id < self.vocab_size, "token id {id} out of range");
            x.row_mut(row).assign(&self.params[EMBED].row(id));
        }
        x
    }

    /// Full forward pass from an embedding matrix (rows = positions).
    pub fn forward_embeddings(&self, x: &Array2<f64>) -> ClassifierCache {
        let scale = 1.0 / (self.dim as f64).sqrt();
        let q = x.dot(&self.params[WQ]);
        let k = x.dot(&self.params[WK]);
        let v = x.dot(&self.params[WV]);
        let mut attn = q.dot(&k.t());
        attn.mapv_inplace(|s| s * scale);
        for mut row in attn.rows_mut() {
            softmax_inplace(row.as_slice_mut().expect("contiguous row"));
        }
        let h = attn.dot(&v);
        let pooled = h.mean_axis(Axis(0)).expect("non-empty sequence");
        let mut logits: Vec<f64> = pooled.dot(&self.params[W_HEAD]).to_vec();
        for (l, b) in logits.iter_mut().zip(self.params[B_HEAD].row(0)) {
            *l += b;
        }
        let mut probs = logits.clone();
        softmax_inplace(&mut probs);
        ClassifierCache { ids: None, x: x.clone(), q, k, v, attn, pooled, logits, probs }
    }

    /// Forward pass from token ids, with cache.
    pub fn forward_cached(&self, ids: &[usize]) -> ClassifierCache {
        let prepared = self.prepare_ids(ids);
        let x = self.embed_ids(&prepared);
        let mut cache = self.forward_embeddings(&x);
        cache.ids = Some(prepared);
        cache
    }

    /// Class probabilities for a token id sequence.
    pub fn forward_ids(&self, ids: &[usize]) -> Vec<f64> {
        self.forward_cached(ids).probs
    }

    /// Class probabilities for a token sequence.
    pub fn forward(&self, tokens: &TokenSequence) -> Vec<f64> {
        self.forward_ids(&tokens.ids)
    }

    /// Predicted label: argmax of the class probabilities.
    pub fn predict(&self, tokens: &TokenSequence) -> usize {
        argmax(&self.forward(tokens))
    }

    /// Batched probabilities. Sequences are grouped by prepared length so the
    /// Q/K/V projections run as one matrix product per group.
    pub fn forward_batch(&self, seqs: &[Vec<usize>]) -> Vec<Vec<f64>> {
        let prepared: Vec<Vec<usize>> = seqs.iter().map(|s| self.prepare_ids(s)).collect();
        let mut by_len: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, p) in prepared.iter().enumerate() {
            by_len.entry(p.len()).or_default().push(i);
        }
        let scale = 1.0 / (self.dim as f64).sqrt();
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); seqs.len()];
        for (len, members) in by_len {
            let batch = members.len();
            let mut x_all = Array2::zeros((batch * len, self.dim));
            for (slot, &i) in members.iter().enumerate() {
                for (row, &id) in prepared[i].iter().enumerate() {
                    x_all.row_mut(slot * len + row).assign(&self.params[EMBED].row(id));
                }
            }
            let q_all = x_all.dot(&self.params[WQ]);
            let k_all = x_all.dot(&self.params[WK]);
            let v_all = x_all.dot(&self.params[WV]);
            for (slot, &i) in members.iter().enumerate() {
                let rows = s![slot * len..(slot + 1) * len, ..];
                let q = q_all.slice(rows);
                let k = k_all.slice(rows);
                let v = v_all.slice(rows);
                let mut attn = q.dot(&k.t());
                attn.mapv_inplace(|s| s * scale);
                for mut row in attn.rows_mut() {
                    softmax_inplace(row.as_slice_mut().expect("contiguous row"));
                }
                let h = attn.dot(&v);
                let pooled = h.mean_axis(Axis(0)).expect("non-empty");
                let mut logits: Vec<f64> = pooled.dot(&self.params[W_HEAD]).to_vec();
                for (l, b) in logits.iter_mut().zip(self.params[B_HEAD].row(0)) {
                    *l += b;
                }
                softmax_inplace(&mut logits);
                out[i] = logits;
            }
        }
        out
    }

    /// Backward pass from d(logits). Returns parameter gradients (embedding rows
    /// are scattered only when the cache came from token ids) and d(input embeddings).
    pub fn backward(&self, cache: &ClassifierCache, dlogits: &[f64]) -> (ClassifierGrads, Array2<f64>) {
        let len = cache.x.nrows();
        let scale = 1.0 / (self.dim as f64).sqrt();
        let dlogits = Array1::from_vec(dlogits.to_vec());

        let mut grads: ClassifierGrads =
            self.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();

        // head
        grads[B_HEAD].row_mut(0).assign(&dlogits);
        let dw_head = cache
            .pooled
            .view()
            .insert_axis(Axis(1))
            .dot(&dlogits.view().insert_axis(Axis(0)));
        grads[W_HEAD].assign(&dw_head);
        let dpooled = self.params[W_HEAD].dot(&dlogits);

        // mean pooling
        let mut dh = Array2::zeros((len, self.dim));
        let inv_len = 1.0 / len as f64;
        for mut row in dh.rows_mut() {
            row.assign(&(&dpooled * inv_len));
        }

        // attention
        let dattn = dh.dot(&cache.v.t());
        let dv = cache.attn.t().dot(&dh);
        let mut dscores = softmax_rows_backward(&cache.attn, &dattn);
        dscores.mapv_inplace(|s| s * scale);
        let dq = dscores.dot(&cache.k);
        let dk = dscores.t().dot(&cache.q);

        grads[WQ] = cache.x.t().dot(&dq);
        grads[WK] = cache.x.t().dot(&dk);
        grads[WV] = cache.x.t().dot(&dv);

        let dx = dq.dot(&self.params[WQ].t())
            + dk.dot(&self.params[WK].t())
            + dv.dot(&self.params[WV].t());

        if let Some(ids) = &cache.ids {
            for (row, &id) in ids.iter().enumerate() {
                let mut target = grads[EMBED].row_mut(id);
                target += &dx.row(row);
            }
        }
        (grads, dx)
    }

    fn check_target(&self, target: usize) -> Result<()> {
        if target >= self.num_classes {
            return Err(Error::TargetOutOfRange { target, num_classes: self.num_classes });
        }
        Ok(())
    }

    /// Gradient of the target-class probability w.r.t. the input embeddings,
    /// shape [prepared length × dim].
    pub fn input_gradients(&self, tokens: &TokenSequence, target: usize) -> Result<Array2<f64>> {
        self.check_target(target)?;
        let cache = self.forward_cached(&tokens.ids);
        // d p_t / d logit_j = p_t (δ_tj − p_j)
        let pt = cache.probs[target];
        let dlogits: Vec<f64> = (0..self.num_classes)
            .map(|j| pt * (if j == target { 1.0 } else { 0.0 } - cache.probs[j]))
            .collect();
        Ok(self.backward(&cache, &dlogits).1)
    }

    /// Gradient of the target-class probability w.r.t. an explicit embedding
    /// matrix, used by path-integral attribution.
    pub fn prob_grad_embeddings(&self, x: &Array2<f64>, target: usize) -> Result<(f64, Array2<f64>)> {
        self.check_target(target)?;
        let cache = self.forward_embeddings(x);
        let pt = cache.probs[target];
        let dlogits: Vec<f64> = (0..self.num_classes)
            .map(|j| pt * (if j == target { 1.0 } else { 0.0 } - cache.probs[j]))
            .collect();
        Ok((pt, self.backward(&cache, &dlogits).1))
    }

    /// Gradient of the pre-softmax logit for `target` w.r.t. the input embeddings.
    pub fn logit_input_gradients(&self, tokens: &TokenSequence, target: usize) -> Result<Array2<f64>> {
        self.check_target(target)?;
        let cache = self.forward_cached(&tokens.ids);
        let mut dlogits = vec![0.0; self.num_classes];
        dlogits[target] = 1.0;
        Ok(self.backward(&cache, &dlogits).1)
    }

    /// Cross-entropy loss against `gold` with parameter gradients and the
    /// input-embedding gradient.
    pub fn loss_and_grads(&self, ids: &[usize], gold: usize) -> (f64, ClassifierGrads, Array2<f64>) {
        let cache = self.forward_cached(ids);
        let loss = -cache.probs[gold].max(1e-300).ln();
        let mut dlogits = cache.probs.clone();
        dlogits[gold] -= 1.0;
        let (grads, dx) = self.backward(&cache, &dlogits);
        (loss, grads, dx)
    }
}
