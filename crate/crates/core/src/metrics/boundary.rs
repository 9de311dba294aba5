use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob_label::{sigmoid, LogisticFeatureModel};
use crate::trainers::{Network, TrainedModel};

/// Anything that maps a feature vector to a class-1 score.
pub trait Scorer {
    fn input_dim(&self) -> usize;
    fn score(&self, x: &[f64]) -> Result<f64>;
}

/// Adapts a closure over a fixed input dimension.
pub struct FnScorer<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnScorer<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnScorer { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> Scorer for FnScorer<F> {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

impl Scorer for LogisticFeatureModel {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)))
    }
}

/// A binary [`TrainedModel`] with its network built once.
pub struct ModelScorer {
    model: TrainedModel,
    net: Network,
}

impl ModelScorer {
    pub fn new(model: TrainedModel) -> Result<Self> {
        let net = model.network()?;
        if net.num_classes() != 2 {
            return Err(Error::Unsupported("scoring needs a binary model".into()));
        }
        Ok(ModelScorer { model, net })
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }
}

impl Scorer for ModelScorer {
    fn input_dim(&self) -> usize {
        self.net.input_len()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.model.predict(&self.net, x)?.get(1))
    }
}

/// Scores sampled on a regular lattice; `scores[j * xs.len() + i]` is the
/// score at `(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub scores: Vec<f64>,
}

impl BoundaryGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.scores[j * self.xs.len() + i]
    }

    /// Long-form `x,y,score`, x varying fastest.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,score\n");
        for (j, y) in self.ys.iter().enumerate() {
            for (i, x) in self.xs.iter().enumerate() {
                s.push_str(&format!("{x},{y},{}\n", self.at(i, j)));
            }
        }
        s
    }
}

fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
    let (lo, hi) = range;
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Evaluates a 2-D scorer on a `resolution x resolution` lattice spanning
/// the closed ranges.
pub fn decision_boundary_grid(
    scorer: &dyn Scorer,
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: usize,
) -> Result<BoundaryGrid> {
    if scorer.input_dim() != 2 {
        return Err(Error::Unsupported(format!(
            "decision boundaries need a 2-D model, got {} inputs",
            scorer.input_dim()
        )));
    }
    if resolution == 0 {
        return Err(Error::arg("resolution must be positive"));
    }
    for (lo, hi) in [x_range, y_range] {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::arg(format!("invalid range [{lo}, {hi}]")));
        }
    }
    let xs = axis(x_range, resolution);
    let ys = axis(y_range, resolution);
    let mut scores = Vec::with_capacity(resolution * resolution);
    for &y in &ys {
        for &x in &xs {
            scores.push(scorer.score(&[x, y])?);
        }
    }
    Ok(BoundaryGrid { xs, ys, scores })
}
