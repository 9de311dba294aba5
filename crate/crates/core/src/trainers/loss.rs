use crate::data::ClassDistribution;
use crate::error::{Error, Result};

use super::network::Parameters;

/// Predictions are clamped below at this value before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

pub(crate) fn cross_entropy(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter()
        .zip(target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| -t * p.max(LOG_CLAMP).ln())
        .sum()
}

/// `-sum_k target_k * ln(max(pred_k, 1e-12))`.
pub fn cross_entropy_loss(pred: &ClassDistribution, target: &ClassDistribution) -> Result<f64> {
    if pred.num_classes() != target.num_classes() {
        return Err(Error::shape(format!(
            "prediction has {} classes, target {}",
            pred.num_classes(),
            target.num_classes()
        )));
    }
    Ok(cross_entropy(pred.probs(), target.probs()))
}

/// `batch_loss + lambda * |params - anchor|^2`.
pub fn regularized_loss(
    batch_loss: f64,
    params: &Parameters,
    anchor: &Parameters,
    lambda: f64,
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::arg("lambda must be non-negative"));
    }
    if !params.same_layout(anchor) {
        return Err(Error::arg("parameters and anchor have different layouts"));
    }
    Ok(batch_loss + lambda * params.squared_distance(anchor)?)
}
