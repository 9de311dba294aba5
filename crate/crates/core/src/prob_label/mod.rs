//! Expert feature models and the soft targets derived from them.
//!
//! A [`GaussianClassConditional`] (or a [`LogisticFeatureModel`]) is fitted
//! on extracted features and hard labels; its posterior `p(Y | z)` becomes the
//! probabilistic label of each training instance. Label smoothing and
//! corruption of posteriors serve as baselines.

mod gaussian;
mod logistic;
mod targets;

pub use gaussian::{
    bayes_posterior, fit_gaussian_class_conditional, gaussian_log_density,
    GaussianClassConditional, Posterior,
};
pub use logistic::{fit_logistic_feature_model, logistic_posterior, sigmoid, LogisticFeatureModel};
pub use targets::{corrupt_posterior, smooth_labels, CorruptionMode};
