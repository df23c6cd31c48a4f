//! Integrated gradients along the straight path from a PAD baseline.

use ndarray::{Array1, Array2};

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};
use crate::nnet::ClassifierModel;

use super::{AttributionMap, AttributionMethod};

#[derive(Debug, Clone, Copy)]
pub struct IgConfig {
    /// Riemann steps for the path integral.
    pub steps: usize,
    pub target_class: usize,
}

impl Default for IgConfig {
    fn default() -> Self {
        IgConfig { steps: 64, target_class: 0 }
    }
}

/// A scalar function of an embedding matrix with an analytic gradient.
/// Lets tests swap the classifier for a hand-built surrogate.
pub trait ScoreWithGrad {
    fn value_and_grad(&self, x: &Array2<f64>) -> (f64, Array2<f64>);
}

struct ClassProb<'a> {
    model: &'a ClassifierModel,
    target: usize,
}

impl ScoreWithGrad for ClassProb<'_> {
    fn value_and_grad(&self, x: &Array2<f64>) -> (f64, Array2<f64>) {
        self.model.prob_grad_embeddings(x, self.target).expect("target validated by caller")
    }
}

/// Core path integral: per-token attributions and the per-dimension matrix.
///
/// attribution[i][d] = (x[i][d] − baseline[i][d]) · (1/m) Σ_{t=1..m} ∂f(baseline + (t/m)(x − baseline)) / ∂x[i][d]
///
/// Token scores sum the per-dimension attributions over d.
pub fn integrated_gradients(
    f: &dyn ScoreWithGrad,
    x: &Array2<f64>,
    baseline: &Array2<f64>,
    steps: usize,
) -> (Array1<f64>, Array2<f64>) {
    assert!(steps >= 1, "steps must be >= 1");
    assert_eq!(x.raw_dim(), baseline.raw_dim());
    let delta = x - baseline;
    let mut grad_sum: Array2<f64> = Array2::zeros(x.raw_dim());
    for t in 1..=steps {
        let alpha = t as f64 / steps as f64;
        let point = baseline + &(&delta * alpha);
        let (_, grad) = f.value_and_grad(&point);
        grad_sum += &grad;
    }
    grad_sum.mapv_inplace(|g| g / steps as f64);
    let per_dim = &delta * &grad_sum;
    let token_scores = per_dim.sum_axis(ndarray::Axis(1));
    (token_scores, per_dim)
}

/// Attribution of the target-class probability to each input token, using a
/// baseline of PAD embeddings with the same length as the input.
pub fn ig_attribute(
    model: &ClassifierModel,
    tokens: &TokenSequence,
    sequence_ref: impl Into<String>,
    config: &IgConfig,
) -> Result<AttributionMap> {
    if tokens.is_empty() {
        return Err(Error::invalid("tokens", "input must be non-empty"));
    }
    if config.target_class >= model.num_classes {
        return Err(Error::TargetOutOfRange {
            target: config.target_class,
            num_classes: model.num_classes,
        });
    }
    if config.steps == 0 {
        return Err(Error::invalid("steps", "must be >= 1"));
    }
    let prepared = model.prepare_ids(&tokens.ids);
    let x = model.embed_ids(&prepared);
    let baseline = model.embed_ids(&vec![0usize; prepared.len()]);
    let f = ClassProb { model, target: config.target_class };
    let (token_scores, _) = integrated_gradients(&f, &x, &baseline, config.steps);

    // scores beyond the model's length cap are zero by convention
    let mut scores = vec![0.0; tokens.len()];
    for (i, s) in token_scores.iter().enumerate() {
        scores[i] = *s;
    }
    let map = AttributionMap {
        scores,
        target_class: config.target_class,
        method: AttributionMethod::Ig,
        sequence_ref: sequence_ref.into(),
    };
    map.validate(tokens.len())?;
    Ok(map)
}
