#![allow(dead_code)]

use problabel::experiments::{sample_mixture, MixtureSpec};
use problabel::prob_label::{corrupt_posterior, CorruptionMode};
use problabel::{ClassDistribution, Dataset, Seed, Standardizer};

/// Balanced Experiment-1 sample, standardized, with the generating
/// posterior attached as soft labels.
pub fn experiment1_data(n: usize, seed: Seed) -> (Dataset, Standardizer) {
    let spec = MixtureSpec::experiment1();
    let model = spec.model().unwrap();
    let raw = sample_mixture(&spec, &[n / 2, n / 2], seed).unwrap();
    let soft: Vec<ClassDistribution> = raw
        .features()
        .unwrap()
        .iter()
        .map(|z| model.posterior(z).unwrap())
        .collect();
    let scaler = Standardizer::fit_dataset(&raw).unwrap();
    (
        scaler.apply(&raw).unwrap().with_soft_labels(soft).unwrap(),
        scaler,
    )
}

/// The same data with every soft label reflected.
pub fn reflected(data: &Dataset) -> Dataset {
    let soft = data
        .soft_labels()
        .unwrap()
        .iter()
        .map(|p| corrupt_posterior(p, CorruptionMode::Reflect, Seed(0)).unwrap())
        .collect();
    data.clone().with_soft_labels(soft).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
