//! Finite-difference oracles for every analytic gradient path: classifier
//! parameter and input gradients, and generator loss gradients.

use advforge::corpus::TokenSequence;
use advforge::nnet::{ClassifierModel, GeneratorModel, LossMask};
use advforge::util::{seeded_rng, uniform_f64};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const TOL: f64 = 1e-4;

/// Symmetric relative error. The 1e-6 floor keeps the check meaningful for
/// gradients above the central-difference noise scale (~1e-12 at step 1e-4)
/// while near-zero pairs compare in absolute terms.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-6)
}

fn random_ids(rng: &mut ChaCha8Rng, vocab_size: usize, len: usize) -> Vec<usize> {
    (0..len).map(|_| (uniform_f64(rng) * vocab_size as f64) as usize % vocab_size).collect()
}

/// Central finite difference of `f` when parameter `(k, i, j)` is nudged.
fn central_diff_param<F: Fn(&ClassifierModel) -> f64>(
    model: &ClassifierModel,
    k: usize,
    i: usize,
    j: usize,
    f: F,
) -> f64 {
    let mut plus = model.clone();
    plus.params_mut()[k][(i, j)] += STEP;
    let mut minus = model.clone();
    minus.params_mut()[k][(i, j)] -= STEP;
    (f(&plus) - f(&minus)) / (2.0 * STEP)
}

fn sample_coords(rng: &mut ChaCha8Rng, rows: usize, cols: usize, n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .map(|_| {
            let i = (uniform_f64(rng) * rows as f64) as usize % rows;
            let j = (uniform_f64(rng) * cols as f64) as usize % cols;
            (i, j)
        })
        .collect()
}

#[test]
fn classifier_parameter_gradients_match_finite_differences() {
    let mut rng = seeded_rng(101);
    for draw in 0..20 {
        let vocab_size = 15;
        let model = ClassifierModel::new(vocab_size, 8, 3, 16, 1000 + draw);
        let len = 2 + (uniform_f64(&mut rng) * 4.0) as usize;
        let ids = random_ids(&mut rng, vocab_size, len);
        let gold = (uniform_f64(&mut rng) * 3.0) as usize % 3;
        let (_, grads, _) = model.loss_and_grads(&ids, gold);

        for (k, g) in grads.iter().enumerate() {
            for (i, j) in sample_coords(&mut rng, g.nrows(), g.ncols(), 3) {
                let numeric = central_diff_param(&model, k, i, j, |m| m.loss_and_grads(&ids, gold).0);
                let err = rel_err(g[(i, j)], numeric);
                assert!(
                    err <= TOL,
                    "draw {draw} param {k} ({i},{j}): analytic {} vs numeric {numeric}, rel {err}",
                    g[(i, j)]
                );
            }
        }
    }
}

#[test]
fn classifier_input_gradients_match_finite_differences() {
    let mut rng = seeded_rng(202);
    for draw in 0..20 {
        let vocab_size = 15;
        let model = ClassifierModel::new(vocab_size, 8, 3, 16, 2000 + draw);
        let len = 2 + (uniform_f64(&mut rng) * 4.0) as usize;
        let ids = random_ids(&mut rng, vocab_size, len);
        let surfaces = vec!["w".to_string(); ids.len()];
        let tokens = TokenSequence::new(ids.clone(), surfaces);
        let target = (uniform_f64(&mut rng) * 3.0) as usize % 3;

        let analytic = model.input_gradients(&tokens, target).unwrap();
        let x0 = model.embed_ids(&ids);
        for (i, j) in sample_coords(&mut rng, x0.nrows(), x0.ncols(), 6) {
            let mut plus = x0.clone();
            plus[(i, j)] += STEP;
            let mut minus = x0.clone();
            minus[(i, j)] -= STEP;
            let fp = model.prob_grad_embeddings(&plus, target).unwrap().0;
            let fm = model.prob_grad_embeddings(&minus, target).unwrap().0;
            let numeric = (fp - fm) / (2.0 * STEP);
            let err = rel_err(analytic[(i, j)], numeric);
            assert!(
                err <= TOL,
                "draw {draw} input ({i},{j}): analytic {} vs numeric {numeric}, rel {err}",
                analytic[(i, j)]
            );
        }
    }
}

#[test]
fn generator_gradients_match_finite_differences() {
    let mut rng = seeded_rng(303);
    for draw in 0..20 {
        let vocab_size = 12;
        let model = GeneratorModel::new(vocab_size, 8, 16, 3000 + draw);
        let len = 3 + (uniform_f64(&mut rng) * 4.0) as usize;
        let ids = random_ids(&mut rng, vocab_size, len);
        let (_, grads) = model.loss_and_grads(&ids, LossMask::All).unwrap();

        for (k, g) in grads.iter().enumerate() {
            for (i, j) in sample_coords(&mut rng, g.nrows(), g.ncols(), 2) {
                let mut plus = model.clone();
                plus.params_mut()[k][(i, j)] += STEP;
                let mut minus = model.clone();
                minus.params_mut()[k][(i, j)] -= STEP;
                let numeric =
                    (plus.lm_loss(&ids).unwrap() - minus.lm_loss(&ids).unwrap()) / (2.0 * STEP);
                let err = rel_err(g[(i, j)], numeric);
                assert!(
                    err <= TOL,
                    "draw {draw} param {k} ({i},{j}): analytic {} vs numeric {numeric}, rel {err}",
                    g[(i, j)]
                );
            }
        }
    }
}

#[test]
fn generator_masked_loss_gradients_match_finite_differences() {
    let mut rng = seeded_rng(404);
    let model = GeneratorModel::new(10, 8, 16, 5005);
    let ids = random_ids(&mut rng, 10, 6);
    let mask: Vec<bool> = vec![false, false, true, false, true, true];
    let (_, grads) = model.loss_and_grads(&ids, LossMask::Targets(&mask)).unwrap();
    for (k, g) in grads.iter().enumerate() {
        for (i, j) in sample_coords(&mut rng, g.nrows(), g.ncols(), 2) {
            let mut plus = model.clone();
            plus.params_mut()[k][(i, j)] += STEP;
            let mut minus = model.clone();
            minus.params_mut()[k][(i, j)] -= STEP;
            let fp = plus.lm_loss_masked(&ids, LossMask::Targets(&mask)).unwrap();
            let fm = minus.lm_loss_masked(&ids, LossMask::Targets(&mask)).unwrap();
            let numeric = (fp - fm) / (2.0 * STEP);
            let err = rel_err(g[(i, j)], numeric);
            assert!(err <= TOL, "param {k} ({i},{j}): rel {err}");
        }
    }
}
