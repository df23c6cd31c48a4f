//! Minimal neural substrate: an attention-based classifier, a two-block causal
//! decoder, Adam training loops with early stopping, analytic gradients for the
//! white-box methods, and top-k / beam decoding.
//!
//! All math runs in f64; checkpoints store float32 per the on-disk format.

mod adam;
mod checkpoint;
mod classifier;
mod decode;
mod generator;
mod train;

pub use adam::Adam;
pub use checkpoint::{
    checkpoint_paths, load_classifier, load_generator, save_classifier, save_generator,
    CHECKPOINT_VERSION,
};
pub use classifier::{ClassifierCache, ClassifierGrads, ClassifierModel};
pub use decode::{decode, decode_beam, decode_greedy, decode_topk, DecodeConfig, DecodeStrategy};
pub use generator::{GeneratorModel, LossMask};
pub use train::{
    classifier_accuracy, classifier_dataset_loss, generator_dataset_loss, train_classifier,
    train_generator, EpochLog, TrainConfig,
};

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::util::truncated_normal;

/// Fills a matrix with seeded normal(0, std) draws truncated at ±2 std.
pub(crate) fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for v in m.iter_mut() {
        *v = truncated_normal(rng) * std;
    }
    m
}

pub(crate) const INIT_STD: f64 = 0.02;

/// Row-wise softmax backward: given post-softmax rows `a` and upstream `da`,
/// returns d(pre-softmax). Each row: a ⊙ (da − ⟨da, a⟩).
pub(crate) fn softmax_rows_backward(a: &Array2<f64>, da: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(a.raw_dim());
    for i in 0..a.nrows() {
        let dot: f64 = (0..a.ncols()).map(|j| da[(i, j)] * a[(i, j)]).sum();
        for j in 0..a.ncols() {
            out[(i, j)] = a[(i, j)] * (da[(i, j)] - dot);
        }
    }
    out
}
