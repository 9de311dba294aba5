use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{ClassDistribution, FeatureVector};
use crate::error::{Error, Result};
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const SYMMETRY_TOL: f64 = 1e-9;
const JITTER_SCALE: f64 = 1e-6;
const MAX_JITTER_ATTEMPTS: usize = 12;

fn to_matrix(cov: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(Error::shape(format!("covariance must be {d}x{d}")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    for i in 0..d {
        for j in 0..i {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::LinearAlgebra("covariance is not symmetric".into()));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearAlgebra(
            "covariance has non-finite entries".into(),
        ));
    }
    Ok(m)
}

/// Lower Cholesky factor, or `None` if the matrix is not positive definite.
fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.l())
}

/// A multivariate normal with a cached Cholesky factor.
#[derive(Debug, Clone)]
struct Component {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl Component {
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::arg("zero-dimensional Gaussian"));
        }
        let m = to_matrix(&cov, d)?;
        let chol = cholesky_lower(&m)
            .ok_or_else(|| Error::LinearAlgebra("covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Component {
            mean,
            cov,
            chol,
            log_det,
        })
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let d = self.mean.len();
        let diff = DVector::from_iterator(d, z.iter().zip(&self.mean).map(|(a, b)| a - b));
        let y = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        -0.5 * (d as f64 * LN_2PI + self.log_det + y.norm_squared())
    }

    fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let d = self.mean.len();
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.normal()));
        let x = &self.chol * z;
        self.mean.iter().zip(x.iter()).map(|(m, v)| m + v).collect()
    }
}

/// Log of the multivariate normal density `N(z; mean, covariance)`.
pub fn gaussian_log_density(z: &[f64], mean: &[f64], covariance: &[Vec<f64>]) -> Result<f64> {
    if z.len() != mean.len() {
        return Err(Error::shape(format!(
            "point has dimension {}, mean has {}",
            z.len(),
            mean.len()
        )));
    }
    let c = Component::new(mean.to_vec(), covariance.to_vec())?;
    Ok(c.log_density(z))
}

/// Per-class Gaussian feature densities combined with class priors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GaussianDoc", into = "GaussianDoc")]
pub struct GaussianClassConditional {
    components: Vec<Component>,
    priors: ClassDistribution,
}

/// Result of [`bayes_posterior`].
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub distribution: ClassDistribution,
    /// Set when every joint density was zero (or NaN) and the uniform
    /// distribution was returned instead.
    pub uniform_fallback: bool,
}

impl GaussianClassConditional {
    pub fn new(
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
        priors: ClassDistribution,
    ) -> Result<Self> {
        let k = means.len();
        if k < 2 || covariances.len() != k || priors.num_classes() != k {
            return Err(Error::shape(format!(
                "{} means, {} covariances, {} priors",
                k,
                covariances.len(),
                priors.num_classes()
            )));
        }
        let d = means[0].len();
        if means.iter().any(|m| m.len() != d) {
            return Err(Error::shape("class means differ in dimension"));
        }
        let components = means
            .into_iter()
            .zip(covariances)
            .map(|(m, c)| Component::new(m, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(GaussianClassConditional { components, priors })
    }

    pub fn num_classes(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn priors(&self) -> &ClassDistribution {
        &self.priors
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.components[k].mean
    }

    pub fn covariance(&self, k: usize) -> &[Vec<f64>] {
        &self.components[k].cov
    }

    pub fn with_priors(&self, priors: ClassDistribution) -> Result<Self> {
        if priors.num_classes() != self.num_classes() {
            return Err(Error::shape("prior class count mismatch"));
        }
        Ok(GaussianClassConditional {
            components: self.components.clone(),
            priors,
        })
    }

    /// Same model with the means of classes `a` and `b` exchanged
    /// (covariances stay with their class).
    pub fn with_swapped_means(&self, a: usize, b: usize) -> Result<Self> {
        let k = self.num_classes();
        if a >= k || b >= k {
            return Err(Error::arg("class index out of range"));
        }
        let mut means: Vec<Vec<f64>> = self.components.iter().map(|c| c.mean.clone()).collect();
        means.swap(a, b);
        let covs = self.components.iter().map(|c| c.cov.clone()).collect();
        Self::new(means, covs, self.priors.clone())
    }

    pub fn log_density(&self, k: usize, z: &[f64]) -> f64 {
        self.components[k].log_density(z)
    }

    /// Draws one point from class `k`'s density.
    pub fn sample_class(&self, k: usize, rng: &mut Rng) -> Vec<f64> {
        self.components[k].sample(rng)
    }

    pub fn posterior(&self, z: &FeatureVector) -> Result<ClassDistribution> {
        bayes_posterior(self, z).map(|p| p.distribution)
    }
}

/// Posterior `p(Y = k | z)` by Bayes' rule, evaluated in log space.
pub fn bayes_posterior(model: &GaussianClassConditional, z: &FeatureVector) -> Result<Posterior> {
    if z.dim() != model.dim() {
        return Err(Error::shape(format!(
            "feature dimension {} but model dimension {}",
            z.dim(),
            model.dim()
        )));
    }
    let log_joint: Vec<f64> = (0..model.num_classes())
        .map(|k| model.log_density(k, z.values()) + model.priors.get(k).ln())
        .collect();
    Ok(posterior_from_log_joint(&log_joint))
}

/// Normalizes log joint densities with the log-sum-exp shift.
pub(crate) fn posterior_from_log_joint(log_joint: &[f64]) -> Posterior {
    let k = log_joint.len();
    let max = log_joint
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Posterior {
            distribution: ClassDistribution::uniform(k).expect("k >= 2"),
            uniform_fallback: true,
        };
    }
    let weights: Vec<f64> = log_joint
        .iter()
        .map(|&l| if l.is_nan() { 0.0 } else { (l - max).exp() })
        .collect();
    let total: f64 = weights.iter().sum();
    let probs = weights.into_iter().map(|w| w / total).collect();
    Posterior {
        distribution: ClassDistribution::new(probs).expect("normalized weights"),
        uniform_fallback: false,
    }
}

/// Fits per-class sample means and maximum-likelihood covariances.
///
/// Priors default to the empirical class frequencies. When a covariance is
/// not positive definite, `1e-6 * trace / d` is added to its diagonal,
/// growing tenfold until the Cholesky factorization succeeds.
pub fn fit_gaussian_class_conditional(
    features: &[FeatureVector],
    hard_labels: &[usize],
    num_classes: usize,
    priors: Option<ClassDistribution>,
) -> Result<GaussianClassConditional> {
    if features.len() != hard_labels.len() {
        return Err(Error::shape("features and labels differ in length"));
    }
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = features[0].dim();
    if features.iter().any(|f| f.dim() != d) {
        return Err(Error::shape("feature vectors differ in dimension"));
    }
    let mut means = Vec::with_capacity(num_classes);
    let mut covs = Vec::with_capacity(num_classes);
    let mut counts = Vec::with_capacity(num_classes);
    for k in 0..num_classes {
        let members: Vec<&[f64]> = features
            .iter()
            .zip(hard_labels)
            .filter(|(_, &y)| y == k)
            .map(|(f, _)| f.values())
            .collect();
        if members.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "class {k} has {} instances; at least 2 are required",
                members.len()
            )));
        }
        let n = members.len() as f64;
        let mut mean = vec![0.0; d];
        for m in &members {
            for (a, v) in mean.iter_mut().zip(m.iter()) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= n);
        let mut cov = vec![vec![0.0; d]; d];
        for m in &members {
            for i in 0..d {
                let di = m[i] - mean[i];
                for j in 0..d {
                    cov[i][j] += di * (m[j] - mean[j]);
                }
            }
        }
        cov.iter_mut()
            .for_each(|row| row.iter_mut().for_each(|v| *v /= n));
        covs.push(regularize(cov)?);
        means.push(mean);
        counts.push(members.len() as f64);
    }
    let priors = match priors {
        Some(p) => p,
        None => ClassDistribution::from_weights(counts)?,
    };
    GaussianClassConditional::new(means, covs, priors)
}

fn regularize(mut cov: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let d = cov.len();
    let m = to_matrix(&cov, d)?;
    if cholesky_lower(&m).is_some() {
        return Ok(cov);
    }
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
    let mut jitter = JITTER_SCALE * trace / d as f64;
    if jitter <= 0.0 || !jitter.is_finite() {
        jitter = JITTER_SCALE;
    }
    let base: Vec<f64> = (0..d).map(|i| cov[i][i]).collect();
    for _ in 0..MAX_JITTER_ATTEMPTS {
        for i in 0..d {
            cov[i][i] = base[i] + jitter;
        }
        if cholesky_lower(&to_matrix(&cov, d)?).is_some() {
            return Ok(cov);
        }
        jitter *= 10.0;
    }
    Err(Error::LinearAlgebra(
        "covariance stays singular after jitter".into(),
    ))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassDoc {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianDoc {
    #[serde(rename = "K")]
    k: usize,
    priors: Vec<f64>,
    classes: Vec<ClassDoc>,
}

impl TryFrom<GaussianDoc> for GaussianClassConditional {
    type Error = Error;

    fn try_from(doc: GaussianDoc) -> Result<Self> {
        if doc.k != doc.classes.len() {
            return Err(Error::shape(format!(
                "K = {} but {} classes listed",
                doc.k,
                doc.classes.len()
            )));
        }
        let priors = ClassDistribution::new(doc.priors)?;
        let (means, covs) = doc.classes.into_iter().map(|c| (c.mean, c.cov)).unzip();
        GaussianClassConditional::new(means, covs, priors)
    }
}

impl From<GaussianClassConditional> for GaussianDoc {
    fn from(m: GaussianClassConditional) -> Self {
        GaussianDoc {
            k: m.num_classes(),
            priors: m.priors.into_vec(),
            classes: m
                .components
                .into_iter()
                .map(|c| ClassDoc {
                    mean: c.mean,
                    cov: c.cov,
                })
                .collect(),
        }
    }
}
