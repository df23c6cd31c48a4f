//! Decoder-only autoregressive generator: learned positions, two causal
//! single-head attention blocks with feed-forward and residuals, output
//! projection tied to the embedding matrix.

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::util::{log_sum_exp, seeded_rng, softmax_inplace};

use super::{init_matrix, softmax_rows_backward, INIT_STD};

pub(crate) const GEN_BLOCKS: usize = 2;
const EMBED: usize = 0;
const POS: usize = 1;
const BLOCK_PARAMS: usize = 7; // wq wk wv w1 b1 w2 b2

fn block_base(b: usize) -> usize {
    2 + b * BLOCK_PARAMS
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + GELU_A * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Which target positions contribute to the language-model loss.
#[derive(Debug, Clone, Copy)]
pub enum LossMask<'a> {
    /// Every next-token prediction counts (the first token is only conditioned on).
    All,
    /// `targets[t]` says whether predicting token `t` counts; `targets[0]` is ignored.
    Targets(&'a [bool]),
}

struct BlockCache {
    x_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
    x_mid: Array2<f64>,
    f_pre: Array2<f64>,
    f_act: Array2<f64>,
}

pub(crate) struct GeneratorCache {
    ids: Vec<usize>,
    blocks: Vec<BlockCache>,
    x_final: Array2<f64>,
    pub logits: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct GeneratorModel {
    pub vocab_size: usize,
    pub dim: usize,
    pub max_ctx: usize,
    pub hidden: usize,
    params: Vec<Array2<f64>>,
}

impl GeneratorModel {
    pub fn new(vocab_size: usize, dim: usize, max_ctx: usize, seed: u64) -> Self {
        let hidden = 4 * dim;
        let mut rng = seeded_rng(seed);
        let mut params = vec![
            init_matrix(&mut rng, vocab_size, dim, INIT_STD),
            init_matrix(&mut rng, max_ctx, dim, INIT_STD),
        ];
        for _ in 0..GEN_BLOCKS {
            params.push(init_matrix(&mut rng, dim, dim, INIT_STD)); // wq
            params.push(init_matrix(&mut rng, dim, dim, INIT_STD)); // wk
            params.push(init_matrix(&mut rng, dim, dim, INIT_STD)); // wv
            params.push(init_matrix(&mut rng, dim, hidden, INIT_STD)); // w1
            params.push(Array2::zeros((1, hidden))); // b1
            params.push(init_matrix(&mut rng, hidden, dim, INIT_STD)); // w2
            params.push(Array2::zeros((1, dim))); // b2
        }
        GeneratorModel { vocab_size, dim, max_ctx, hidden, params }
    }

    pub(crate) fn from_params(
        vocab_size: usize,
        dim: usize,
        max_ctx: usize,
        hidden: usize,
        params: Vec<Array2<f64>>,
    ) -> Self {
        GeneratorModel { vocab_size, dim, max_ctx, hidden, params }
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn param_names() -> Vec<String> {
        let mut names = vec!["embed".to_string(), "pos".to_string()];
        for b in 0..GEN_BLOCKS {
            for p in ["wq", "wk", "wv", "w1", "b1", "w2", "b2"] {
                names.push(format!("blk{b}.{p}"));
            }
        }
        names
    }

    pub fn embedding(&self) -> &Array2<f64> {
        &self.params[EMBED]
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len > self.max_ctx {
            return Err(Error::SequenceTooLong {
                id: "(sequence)".into(),
                len,
                max: self.max_ctx,
            });
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, ids: &[usize]) -> GeneratorCache {
        let len = ids.len();
        assert!(len >= 1 && len <= self.max_ctx, "sequence length {len} out of range");
        let scale = 1.0 / (self.dim as f64).sqrt();

        let mut x = Array2::zeros((len, self.dim));
        for (row, &id) in ids.iter().enumerate() {
            assert!(id < self.vocab_size, "token id {id} out of range");
            let emb = self.params[EMBED].row(id);
            let pos = self.params[POS].row(row);
            x.row_mut(row).assign(&(&emb + &pos));
        }

        let mut blocks = Vec::with_capacity(GEN_BLOCKS);
        for b in 0..GEN_BLOCKS {
            let base = block_base(b);
            let x_in = x;
            let q = x_in.dot(&self.params[base]);
            let k = x_in.dot(&self.params[base + 1]);
            let v = x_in.dot(&self.params[base + 2]);
            let mut attn = q.dot(&k.t());
            attn.mapv_inplace(|s| s * scale);
            // causal mask: position i attends to j <= i only
            for i in 0..len {
                for j in i + 1..len {
                    attn[(i, j)] = f64::NEG_INFINITY;
                }
            }
            for mut row in attn.rows_mut() {
                softmax_inplace(row.as_slice_mut().expect("contiguous row"));
            }
            let h = attn.dot(&v);
            let x_mid = &x_in + &h;
            let f_pre = x_mid.dot(&self.params[base + 3]) + &self.params[base + 4].row(0);
            let f_act = f_pre.mapv(gelu);
            let f_out = f_act.dot(&self.params[base + 5]) + &self.params[base + 6].row(0);
            x = &x_mid + &f_out;
            blocks.push(BlockCache { x_in, q, k, v, attn, x_mid, f_pre, f_act });
        }

        let logits = x.dot(&self.params[EMBED].t());
        GeneratorCache { ids: ids.to_vec(), blocks, x_final: x, logits }
    }

    /// Per-position next-token logits, shape [len × vocab].
    pub fn logits(&self, ids: &[usize]) -> Array2<f64> {
        self.forward_cached(ids).logits
    }

    /// Probability distribution over the next token after `ids`.
    pub fn next_distribution(&self, ids: &[usize]) -> Vec<f64> {
        let logits = self.logits(ids);
        let mut row = logits.row(logits.nrows() - 1).to_vec();
        softmax_inplace(&mut row);
        row
    }

    /// Mean cross-entropy of next-token prediction over the masked targets.
    /// The first token is conditioned on, never predicted.
    pub fn lm_loss(&self, ids: &[usize]) -> Result<f64> {
        self.lm_loss_masked(ids, LossMask::All)
    }

    pub fn lm_loss_masked(&self, ids: &[usize], mask: LossMask) -> Result<f64> {
        let (loss, _) = self.loss_core(ids, mask, false)?;
        Ok(loss)
    }

    /// Loss plus parameter gradients, in [`GeneratorModel::params`] order.
    pub fn loss_and_grads(&self, ids: &[usize], mask: LossMask) -> Result<(f64, Vec<Array2<f64>>)> {
        let (loss, grads) = self.loss_core(ids, mask, true)?;
        Ok((loss, grads.expect("gradients requested")))
    }

    fn counted_targets(&self, len: usize, mask: LossMask) -> Result<Vec<usize>> {
        let targets: Vec<usize> = match mask {
            LossMask::All => (1..len).collect(),
            LossMask::Targets(m) => {
                if m.len() != len {
                    return Err(Error::LengthMismatch { left: m.len(), right: len });
                }
                (1..len).filter(|&t| m[t]).collect()
            }
        };
        if targets.is_empty() {
            return Err(Error::invalid("loss mask", "no target positions selected"));
        }
        Ok(targets)
    }

    fn loss_core(
        &self,
        ids: &[usize],
        mask: LossMask,
        want_grads: bool,
    ) -> Result<(f64, Option<Vec<Array2<f64>>>)> {
        let len = ids.len();
        if len < 2 {
            return Err(Error::SequenceTooShort { min: 2, len });
        }
        self.check_len(len)?;
        let targets = self.counted_targets(len, mask)?;
        let cache = self.forward_cached(ids);
        let n = targets.len() as f64;

        let mut loss = 0.0;
        let mut dlogits = if want_grads {
            Some(Array2::<f64>::zeros((len, self.vocab_size)))
        } else {
            None
        };
        for &t in &targets {
            let row = cache.logits.row(t - 1);
            let row_slice = row.as_slice().expect("contiguous row");
            let lse = log_sum_exp(row_slice);
            loss -= (row[ids[t]] - lse) / n;
            if let Some(dl) = dlogits.as_mut() {
                let mut probs = row_slice.to_vec();
                softmax_inplace(&mut probs);
                for (j, p) in probs.iter().enumerate() {
                    dl[(t - 1, j)] = p / n;
                }
                dl[(t - 1, ids[t])] -= 1.0 / n;
            }
        }
        let grads = dlogits.map(|dl| self.backward(&cache, &dl));
        Ok((loss, grads))
    }

    fn backward(&self, cache: &GeneratorCache, dlogits: &Array2<f64>) -> Vec<Array2<f64>> {
        let len = cache.ids.len();
        let scale = 1.0 / (self.dim as f64).sqrt();
        let mut grads: Vec<Array2<f64>> =
            self.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();

        // tied output projection
        grads[EMBED] = dlogits.t().dot(&cache.x_final);
        let mut dx = dlogits.dot(&self.params[EMBED]);

        for b in (0..GEN_BLOCKS).rev() {
            let base = block_base(b);
            let blk = &cache.blocks[b];

            // feed-forward with residual
            let df_out = dx.clone();
            grads[base + 5] = blk.f_act.t().dot(&df_out);
            grads[base + 6].row_mut(0).assign(&df_out.sum_axis(Axis(0)));
            let df_act = df_out.dot(&self.params[base + 5].t());
            let df_pre = &df_act * &blk.f_pre.mapv(gelu_grad);
            grads[base + 3] = blk.x_mid.t().dot(&df_pre);
            grads[base + 4].row_mut(0).assign(&df_pre.sum_axis(Axis(0)));
            let mut dx_mid = dx + df_pre.dot(&self.params[base + 3].t());

            // attention with residual
            let dh = dx_mid.clone();
            let dattn = dh.dot(&blk.v.t());
            let dv = blk.attn.t().dot(&dh);
            let mut dscores = softmax_rows_backward(&blk.attn, &dattn);
            dscores.mapv_inplace(|s| s * scale);
            let dq = dscores.dot(&blk.k);
            let dk = dscores.t().dot(&blk.q);
            grads[base] = blk.x_in.t().dot(&dq);
            grads[base + 1] = blk.x_in.t().dot(&dk);
            grads[base + 2] = blk.x_in.t().dot(&dv);
            dx_mid = dx_mid
                + dq.dot(&self.params[base].t())
                + dk.dot(&self.params[base + 1].t())
                + dv.dot(&self.params[base + 2].t());
            dx = dx_mid;
        }

        // dx now holds the gradient at embed+pos
        for row in 0..len {
            let mut pos_row = grads[POS].row_mut(row);
            pos_row += &dx.row(row);
            let mut emb_row = grads[EMBED].row_mut(cache.ids[row]);
            emb_row += &dx.row(row);
        }
        grads
    }
}
