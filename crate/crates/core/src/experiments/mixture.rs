use serde::{Deserialize, Serialize};

use crate::data::{ClassDistribution, Dataset, FeatureVector};
use crate::error::{Error, Result};
use crate::prob_label::GaussianClassConditional;
use crate::rng::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub weight: f64,
}

/// Gaussian mixture whose component `k` generates class `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub components: Vec<MixtureComponent>,
}

impl MixtureSpec {
    /// Two correlated bivariate Gaussians with equal weights:
    /// class 0 at [5, 3] (correlation 0.5), class 1 at [4, 4] (correlation 0.7).
    pub fn experiment1() -> Self {
        MixtureSpec {
            components: vec![
                MixtureComponent {
                    mean: vec![5.0, 3.0],
                    covariance: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
                    weight: 0.5,
                },
                MixtureComponent {
                    mean: vec![4.0, 4.0],
                    covariance: vec![vec![1.0, 0.7], vec![0.7, 1.0]],
                    weight: 0.5,
                },
            ],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> Result<ClassDistribution> {
        ClassDistribution::new(self.components.iter().map(|c| c.weight).collect())
    }

    /// The generating class-conditional model, priors set to the weights.
    pub fn model(&self) -> Result<GaussianClassConditional> {
        GaussianClassConditional::new(
            self.components.iter().map(|c| c.mean.clone()).collect(),
            self.components
                .iter()
                .map(|c| c.covariance.clone())
                .collect(),
            self.weights()?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.model().map(|_| ())
    }
}

/// Draws exactly `counts[k]` instances from component `k`, in a seeded
/// random order. No soft labels are attached.
pub fn sample_mixture(spec: &MixtureSpec, counts: &[usize], seed: Seed) -> Result<Dataset> {
    let model = spec.model()?;
    sample_from_model(&model, counts, seed)
}

pub(crate) fn sample_from_model(
    model: &GaussianClassConditional,
    counts: &[usize],
    seed: Seed,
) -> Result<Dataset> {
    if counts.len() != model.num_classes() {
        return Err(Error::shape(format!(
            "{} counts for {} components",
            counts.len(),
            model.num_classes()
        )));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seed.rng();
    let mut rows = Vec::with_capacity(total);
    for (k, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            rows.push((FeatureVector::new(model.sample_class(k, &mut rng))?, k));
        }
    }
    rng.shuffle(&mut rows);
    let (feats, labels) = rows.into_iter().unzip();
    Dataset::from_features(feats, labels, model.num_classes())
}

/// Exact posterior of the generating mixture at `x`.
pub fn true_posterior(spec: &MixtureSpec, x: &FeatureVector) -> Result<ClassDistribution> {
    spec.model()?.posterior(x)
}
