//! Classifiers, losses and training procedures.

pub mod loss;
mod model;
mod network;
mod train;

pub use loss::{cross_entropy_loss, regularized_loss, LOG_CLAMP};
pub use model::TrainedModel;
pub use network::{Activation, Gradient, LayerSpec, Network, NetworkSpec, ParamBlock, Parameters};
pub use train::{
    cross_validate_lambda, predict_proba, predict_scores, resolve_targets, train, train_from,
    train_two_stage, Initialization, LabelStrategy, LambdaSelection, TrainConfig, TrainOutput,
    TwoStageOutput, DEFAULT_LAMBDA_GRID,
};
pub(crate) use train::{predict_scores_network, train_network, two_stage_network};

use crate::data::ClassDistribution;
use crate::error::Result;

/// Class probabilities of one input under `spec` with `params`.
pub fn forward(
    spec: &NetworkSpec,
    params: &Parameters,
    input: &[f64],
) -> Result<ClassDistribution> {
    Network::new(spec.clone())?.forward(params, input)
}

/// Gradient of the mean batch cross-entropy, plus `2 * lambda * (theta - anchor)`
/// when an anchor is given. `inputs` is `batch x input_len`, `targets` is
/// `batch x K`, both row-major.
pub fn backward(
    spec: &NetworkSpec,
    params: &Parameters,
    inputs: &[f64],
    targets: &[f64],
    anchor: Option<&Parameters>,
    lambda: f64,
) -> Result<Vec<f64>> {
    let net = Network::new(spec.clone())?;
    Ok(net
        .loss_and_gradient(params, inputs, targets, anchor.map(|a| (a, lambda)))?
        .values)
}
