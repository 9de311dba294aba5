use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{ClassDistribution, FeatureVector};
use crate::error::{Error, Result};
use crate::trainers::TrainConfig;

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `p(Y = 1 | z) = sigmoid(w . z + b)` over extracted features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticFeatureModel {
    weights: Vec<f64>,
    bias: f64,
}

impl LogisticFeatureModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::arg("logistic model parameters must be finite"));
        }
        Ok(LogisticFeatureModel { weights, bias })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, z: &[f64]) -> f64 {
        self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

pub fn logistic_posterior(
    model: &LogisticFeatureModel,
    z: &FeatureVector,
) -> Result<ClassDistribution> {
    if z.dim() != model.dim() {
        return Err(Error::shape(format!(
            "feature dimension {} but model dimension {}",
            z.dim(),
            model.dim()
        )));
    }
    let p = sigmoid(model.logit(z.values()));
    ClassDistribution::new(vec![1.0 - p, p])
}

/// Mean binary cross-entropy plus `weight_decay * |w|^2` (bias not decayed).
fn objective(x: &[Vec<f64>], y: &[f64], theta: &[f64], weight_decay: f64) -> f64 {
    let d = theta.len() - 1;
    let n = x.len() as f64;
    let mut loss = 0.0;
    for (row, &t) in x.iter().zip(y) {
        let s = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[d];
        // log(1 + e^s) - t s, stable for both signs of s.
        let softplus = if s > 0.0 {
            s + (-s).exp().ln_1p()
        } else {
            s.exp().ln_1p()
        };
        loss += softplus - t * s;
    }
    loss / n + weight_decay * theta[..d].iter().map(|w| w * w).sum::<f64>()
}

/// Fits the logistic feature model to binary hard labels.
///
/// Minimizes mean cross-entropy plus `config.weight_decay * |w|^2` with
/// damped Newton steps (Armijo backtracking), stopping once the gradient
/// norm drops below `config.convergence_tol` or after `config.epochs`
/// iterations. When every label is the same class the result is the constant
/// model `w = 0`, `b = logit((n1 + 1) / (n + 2))`.
pub fn fit_logistic_feature_model(
    features: &[FeatureVector],
    hard_labels: &[usize],
    config: &TrainConfig,
) -> Result<LogisticFeatureModel> {
    if features.len() != hard_labels.len() {
        return Err(Error::shape("features and labels differ in length"));
    }
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if hard_labels.iter().any(|&y| y > 1) {
        return Err(Error::Unsupported(
            "logistic feature model needs binary labels".into(),
        ));
    }
    let d = features[0].dim();
    if features.iter().any(|f| f.dim() != d) {
        return Err(Error::shape("feature vectors differ in dimension"));
    }
    let n = features.len();
    let positives = hard_labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        let p = (positives as f64 + 1.0) / (n as f64 + 2.0);
        return LogisticFeatureModel::new(vec![0.0; d], (p / (1.0 - p)).ln());
    }

    let x: Vec<Vec<f64>> = features.iter().map(|f| f.values().to_vec()).collect();
    let y: Vec<f64> = hard_labels.iter().map(|&v| v as f64).collect();
    let wd = config.weight_decay;
    let mut theta = vec![0.0; d + 1];
    let nf = n as f64;

    for _ in 0..config.epochs.max(1) {
        let mut grad = DVector::<f64>::zeros(d + 1);
        let mut hess = DMatrix::<f64>::zeros(d + 1, d + 1);
        for (row, &t) in x.iter().zip(&y) {
            let s = row.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + theta[d];
            let p = sigmoid(s);
            let r = p - t;
            let c = p * (1.0 - p);
            for i in 0..=d {
                let xi = if i < d { row[i] } else { 1.0 };
                grad[i] += r * xi / nf;
                for j in 0..=d {
                    let xj = if j < d { row[j] } else { 1.0 };
                    hess[(i, j)] += c * xi * xj / nf;
                }
            }
        }
        for i in 0..d {
            grad[i] += 2.0 * wd * theta[i];
            hess[(i, i)] += 2.0 * wd;
        }
        if grad.norm() < config.convergence_tol {
            break;
        }
        hess[(d, d)] += 1e-12;
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let f0 = objective(&x, &y, &theta, wd);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a - t * s)
                .collect();
            if objective(&x, &y, &cand, wd) <= f0 - 1e-4 * t * slope {
                theta = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    LogisticFeatureModel::new(theta[..d].to_vec(), theta[d])
}
