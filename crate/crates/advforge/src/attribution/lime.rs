//! LIME: local linear surrogate fitted on mask perturbations.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};
use crate::nnet::ClassifierModel;
use crate::util::{seeded_rng, solve_linear};

use super::{AttributionMap, AttributionMethod};

/// Black-box prediction interface: token sequence in, class probabilities out.
/// Implementations must be pure — the same input always yields the same output —
/// and tolerate concurrent invocation.
pub trait Predict: Sync {
    fn predict(&self, tokens: &TokenSequence) -> Vec<f64>;

    /// Batched variant; the default just loops.
    fn predict_batch(&self, batch: &[TokenSequence]) -> Vec<Vec<f64>> {
        batch.iter().map(|t| self.predict(t)).collect()
    }
}

impl Predict for ClassifierModel {
    fn predict(&self, tokens: &TokenSequence) -> Vec<f64> {
        self.forward(tokens)
    }

    fn predict_batch(&self, batch: &[TokenSequence]) -> Vec<Vec<f64>> {
        let ids: Vec<Vec<usize>> = batch.iter().map(|t| t.ids.clone()).collect();
        self.forward_batch(&ids)
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub max_features: usize,
    /// Exponential-kernel width σ.
    pub kernel_width: f64,
    pub ridge_lambda: f64,
    pub seed: u64,
    /// Vocabulary id substituted at masked positions.
    pub mask_id: usize,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 2000,
            max_features: 20,
            kernel_width: 0.25,
            ridge_lambda: 1.0,
            seed: 0,
            mask_id: 2,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 10 {
            return Err(Error::invalid("n_samples", "must be >= 10"));
        }
        if self.max_features == 0 {
            return Err(Error::invalid("max_features", "must be >= 1"));
        }
        if !(self.kernel_width > 0.0) {
            return Err(Error::invalid("kernel_width", "must be > 0"));
        }
        if self.ridge_lambda < 0.0 {
            return Err(Error::invalid("ridge_lambda", "must be >= 0"));
        }
        Ok(())
    }
}

/// An attribution map plus the fit diagnostics of the local surrogate.
#[derive(Debug, Clone)]
pub struct LimeFit {
    pub map: AttributionMap,
    /// Weighted R² of the refit surrogate on its own perturbation neighborhood.
    pub weighted_r2: f64,
    pub intercept: f64,
}

/// Kernel weight: exp(−D_cos(1, bits)² / σ²), cosine distance to the all-ones
/// (unperturbed) presence vector.
fn kernel_weight(bits: &[f64], sigma: f64) -> f64 {
    let kept: f64 = bits.iter().sum();
    let len = bits.len() as f64;
    let sim = if kept == 0.0 { 0.0 } else { (kept / len).sqrt() };
    let dist = 1.0 - sim;
    (-dist * dist / (sigma * sigma)).exp()
}

/// Weighted ridge with an unpenalized intercept. Returns (intercept, coefs).
fn weighted_ridge(
    bits: &Array2<f64>,
    y: &Array1<f64>,
    w: &Array1<f64>,
    lambda: f64,
) -> Result<(f64, Array1<f64>)> {
    let n = bits.nrows();
    let f = bits.ncols();
    let mut z = Array2::ones((n, f + 1));
    z.slice_mut(ndarray::s![.., 1..]).assign(bits);
    let mut zw = z.clone();
    for (mut row, &wi) in zw.rows_mut().into_iter().zip(w.iter()) {
        row.mapv_inplace(|v| v * wi);
    }
    let mut a = z.t().dot(&zw);
    for j in 1..=f {
        a[(j, j)] += lambda;
    }
    let wy = Array1::from_iter(y.iter().zip(w.iter()).map(|(yi, wi)| yi * wi));
    let b = z.t().dot(&wy);
    let beta = solve_linear(a, b)?;
    Ok((beta[0], beta.slice(ndarray::s![1..]).to_owned()))
}

/// LIME attribution with fit diagnostics.
///
/// Each perturbation masks `u ~ Uniform{1..len}` positions chosen uniformly
/// without replacement; the interpretable representation is the presence
/// bit-vector. A weighted ridge regression of the target-class probability on
/// the bits is fitted, truncated to the `max_features` largest coefficients by
/// magnitude, and refitted on that subset. Deterministic given the seed.
pub fn lime_attribute_with_fit<P: Predict + ?Sized>(
    predict: &P,
    tokens: &TokenSequence,
    target_class: usize,
    sequence_ref: impl Into<String>,
    config: &LimeConfig,
) -> Result<LimeFit> {
    config.validate()?;
    let len = tokens.len();
    if len == 0 {
        return Err(Error::invalid("tokens", "input must be non-empty"));
    }
    let base = predict.predict(tokens);
    if target_class >= base.len() {
        return Err(Error::TargetOutOfRange { target: target_class, num_classes: base.len() });
    }

    // degenerate single-token case: the regression has one point per state
    if len == 1 {
        let mut masked = tokens.clone();
        masked.ids[0] = config.mask_id;
        masked.surfaces[0] = "<mask>".into();
        let dropped = predict.predict(&masked);
        let score = base[target_class] - dropped[target_class];
        return Ok(LimeFit {
            map: AttributionMap {
                scores: vec![score],
                target_class,
                method: AttributionMethod::Lime,
                sequence_ref: sequence_ref.into(),
            },
            weighted_r2: 1.0,
            intercept: dropped[target_class],
        });
    }

    let mut rng = seeded_rng(config.seed);
    let mut bits = Array2::<f64>::ones((config.n_samples, len));
    let mut perturbed = Vec::with_capacity(config.n_samples);
    let mut positions: Vec<usize> = (0..len).collect();
    for s in 0..config.n_samples {
        let u = rng.random_range(1..=len);
        for i in 0..u {
            let j = rng.random_range(i..len);
            positions.swap(i, j);
        }
        let mut sample = tokens.clone();
        for &p in &positions[..u] {
            bits[(s, p)] = 0.0;
            sample.ids[p] = config.mask_id;
            sample.surfaces[p] = "<mask>".into();
        }
        perturbed.push(sample);
    }

    let predictions = predict.predict_batch(&perturbed);
    let y = Array1::from_iter(predictions.iter().map(|p| p[target_class]));
    let w = Array1::from_iter(
        (0..config.n_samples)
            .map(|s| kernel_weight(bits.row(s).as_slice().expect("contiguous"), config.kernel_width)),
    );

    // full fit, then keep the largest-magnitude coefficients and refit
    let (_, full_coefs) = weighted_ridge(&bits, &y, &w, config.ridge_lambda)?;
    let mut ranked: Vec<usize> = (0..len).collect();
    ranked.sort_by(|&a, &b| {
        full_coefs[b]
            .abs()
            .partial_cmp(&full_coefs[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = ranked.into_iter().take(config.max_features.min(len)).collect();
    kept.sort_unstable();

    let mut sub_bits = Array2::zeros((config.n_samples, kept.len()));
    for (col, &p) in kept.iter().enumerate() {
        sub_bits.column_mut(col).assign(&bits.column(p));
    }
    let (intercept, sub_coefs) = weighted_ridge(&sub_bits, &y, &w, config.ridge_lambda)?;

    let mut scores = vec![0.0; len];
    for (col, &p) in kept.iter().enumerate() {
        scores[p] = sub_coefs[col];
    }

    // weighted R² of the refit surrogate on the neighborhood
    let w_sum: f64 = w.sum();
    let y_bar: f64 = y.iter().zip(w.iter()).map(|(yi, wi)| yi * wi).sum::<f64>() / w_sum;
    let mut sse = 0.0;
    let mut sst = 0.0;
    for s in 0..config.n_samples {
        let pred: f64 = intercept
            + kept.iter().enumerate().map(|(col, _)| sub_coefs[col] * sub_bits[(s, col)]).sum::<f64>();
        sse += w[s] * (y[s] - pred).powi(2);
        sst += w[s] * (y[s] - y_bar).powi(2);
    }
    let weighted_r2 = if sst < 1e-18 { 1.0 } else { 1.0 - sse / sst };

    let map = AttributionMap {
        scores,
        target_class,
        method: AttributionMethod::Lime,
        sequence_ref: sequence_ref.into(),
    };
    map.validate(len)?;
    Ok(LimeFit { map, weighted_r2, intercept })
}

/// LIME attribution; see [`lime_attribute_with_fit`].
pub fn lime_attribute<P: Predict + ?Sized>(
    predict: &P,
    tokens: &TokenSequence,
    target_class: usize,
    sequence_ref: impl Into<String>,
    config: &LimeConfig,
) -> Result<AttributionMap> {
    Ok(lime_attribute_with_fit(predict, tokens, target_class, sequence_ref, config)?.map)
}
