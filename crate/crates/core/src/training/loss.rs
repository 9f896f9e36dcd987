use ndarray::{Array3, ArrayView2};

use crate::model::DensePrediction;
use crate::nn::Scalar;
use crate::{Error, Result};

/// Lower bound applied to probabilities inside `-log`.
pub const PROB_EPS: f64 = 1e-8;

/// `ω_i = (L - i)² / Σ_j j²` for `i = 0` (newest frame) to `L - 1` (oldest).
///
/// The oldest weight is stored as `1 - Σ_{i<L-1} ω_i` so that summing the
/// vector in order gives exactly 1; it differs from the quotient by at most
/// a few ulps.
pub fn loss_weights(len: usize) -> Vec<f64> {
    let total: f64 = (1..=len).map(|j| (j * j) as f64).sum();
    let mut w: Vec<f64> = (0..len).map(|i| ((len - i) * (len - i)) as f64 / total).collect();
    if let Some((last, rest)) = w.split_last_mut() {
        if !rest.is_empty() {
            *last = 1.0 - rest.iter().sum::<f64>();
        }
    }
    w
}

fn check_labels(scores: ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
    if labels.len() != scores.ncols() {
        return Err(Error::LengthMismatch {
            left: scores.ncols(),
            right: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= scores.nrows()) {
        return Err(Error::InvalidConfig(format!(
            "label {bad} outside {} classes",
            scores.nrows()
        )));
    }
    Ok(())
}

/// `Σ_i ω_i · -log p[labels[c], c]` with column `c = L - 1 - i`.
/// `labels` are ordered like the columns, oldest first.
pub fn weighted_ce_loss(pred: &DensePrediction, labels: &[usize]) -> Result<f64> {
    check_labels(pred.scores.view(), labels)?;
    let len = labels.len();
    let w = loss_weights(len);
    Ok((0..len)
        .map(|c| w[len - 1 - c] * -pred.scores[[labels[c], c]].max(PROB_EPS).ln())
        .sum())
}

/// Mean weighted loss over a batch of raw scores `N × G × L` and its gradient
/// with respect to those scores.
pub fn weighted_ce_with_grad<T: Scalar>(logits: &Array3<T>, labels: &[Vec<usize>]) -> Result<(f64, Array3<T>)> {
    let (n, g, len) = logits.dim();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: labels.len(),
        });
    }
    let w = loss_weights(len);
    let mut grad = Array3::<T>::zeros((n, g, len));
    let mut total = 0.0;
    for (b, lab) in labels.iter().enumerate() {
        let x = logits
            .index_axis(ndarray::Axis(0), b)
            .mapv(|v| v.to_f64().unwrap_or(f64::NAN));
        check_labels(x.view(), lab)?;
        for c in 0..len {
            let col = x.column(c);
            let max = col.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let z: f64 = col.iter().map(|&v| (v - max).exp()).sum();
            let weight = w[len - 1 - c];
            let p_true = (col[lab[c]] - max).exp() / z;
            if p_true < PROB_EPS {
                // clamped: constant term, no gradient
                total += weight * -PROB_EPS.ln();
                continue;
            }
            total += weight * -p_true.ln();
            for k in 0..g {
                let p = (col[k] - max).exp() / z;
                let target = if k == lab[c] { 1.0 } else { 0.0 };
                grad[[b, k, c]] = T::from_f64_lossy(weight * (p - target) / n as f64);
            }
        }
    }
    Ok((total / n as f64, grad))
}
