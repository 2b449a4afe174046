use ndarray::Array2;

use super::{ModelsError, Result};
use crate::metrics::EdgeSet;
use crate::neural::Tensor;

/// Weights of the positive and negative squared-error terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub positive: f64,
    pub negative: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            positive: 1.0,
            negative: 1.0,
        }
    }
}

fn row_weights(sets: &[EdgeSet], w: LossWeights) -> Array2<f64> {
    Array2::from_shape_fn((sets.len(), 1), |(i, _)| match sets[i] {
        EdgeSet::Positive => w.positive,
        _ => w.negative,
    })
}

/// Weighted sum over queries of the channel-averaged squared error; divide by
/// the query count for the mean.
pub fn weighted_se_sum<'t>(
    preds: Tensor<'t>,
    targets: &Array2<f64>,
    sets: &[EdgeSet],
    w: LossWeights,
) -> Result<Tensor<'t>> {
    let (q, c) = preds.shape();
    if q != targets.nrows() || q != sets.len() || c != targets.ncols() {
        return Err(ModelsError::LengthMismatch(q, targets.nrows()));
    }
    let tape = preds.tape();
    let se = (preds - tape.constant(targets.clone())).square().sum_cols().scale(1.0 / c as f64);
    Ok((se * tape.constant(row_weights(sets, w))).sum())
}

/// `(w_pos * sum_pos se + w_neg * sum_neg se) / N`, `se` averaged over channels.
pub fn mse_loss<'t>(
    preds: Tensor<'t>,
    targets: &Array2<f64>,
    sets: &[EdgeSet],
    w: LossWeights,
) -> Result<Tensor<'t>> {
    let n = sets.len().max(1);
    Ok(weighted_se_sum(preds, targets, sets, w)?.scale(1.0 / n as f64))
}

/// Weighted negative log-likelihood summed over queries and channels under a
/// unit-variance Gaussian: `0.5 * se + 0.5 * ln(2 pi)` per channel.
pub fn gaussian_nll<'t>(
    preds: Tensor<'t>,
    targets: &Array2<f64>,
    sets: &[EdgeSet],
    w: LossWeights,
) -> Result<Tensor<'t>> {
    let (q, c) = preds.shape();
    if q != targets.nrows() || q != sets.len() {
        return Err(ModelsError::LengthMismatch(q, targets.nrows()));
    }
    let tape = preds.tape();
    let per_row = (preds - tape.constant(targets.clone()))
        .square()
        .scale(0.5)
        .add_scalar(0.5 * (2.0 * std::f64::consts::PI).ln())
        .sum_cols();
    debug_assert_eq!(per_row.shape(), (q, 1));
    let _ = c;
    Ok((per_row * tape.constant(row_weights(sets, w))).sum())
}

/// `KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2))` summed over all entries.
pub fn gaussian_kl<'t>(mu_q: Tensor<'t>, sigma_q: Tensor<'t>, mu_p: Tensor<'t>, sigma_p: Tensor<'t>) -> Tensor<'t> {
    let ratio = (sigma_q.square() + (mu_q - mu_p).square()) / sigma_p.square().scale(2.0);
    (sigma_p.ln() - sigma_q.ln() + ratio).add_scalar(-0.5).sum()
}
