//! Probabilistic labels from expert feature models, and the training and
//! evaluation machinery around them.

// `!(x >= 0.0)` deliberately rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod plot;
pub mod prob_label;
pub mod rng;
pub mod trainers;

pub use data::{ClassDistribution, Dataset, FeatureVector, ImageGrid, InputShape, Standardizer};
pub use error::{Error, Result};
pub use rng::{Rng, Seed};
