use serde::{Deserialize, Serialize};

use crate::data::ClassDistribution;
use crate::error::{Error, Result};
use crate::rng::Seed;

/// Label smoothing: the true class keeps `1 - epsilon`, the remaining mass is
/// spread evenly over the other `K - 1` classes.
pub fn smooth_labels(hard: &ClassDistribution, epsilon: f64) -> Result<ClassDistribution> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::arg(format!("epsilon {epsilon} must lie in [0, 1)")));
    }
    let probs = hard.probs();
    let ones = probs.iter().filter(|&&p| p == 1.0).count();
    let zeros = probs.iter().filter(|&&p| p == 0.0).count();
    if ones != 1 || ones + zeros != probs.len() {
        return Err(Error::arg("label smoothing needs a one-hot input"));
    }
    let k = probs.len();
    let off = epsilon / (k - 1) as f64;
    let out = probs
        .iter()
        .map(|&p| if p == 1.0 { 1.0 - epsilon } else { off })
        .collect();
    ClassDistribution::new(out)
}

/// Ways to turn a correct posterior into a misleading but valid one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CorruptionMode {
    /// Reverses the class order (swaps the two entries when K = 2).
    Reflect,
    /// Raises every entry to `gamma` and renormalizes.
    Temper { gamma: f64 },
    /// Applies a seeded random permutation of the entries.
    Permute,
}

pub fn corrupt_posterior(
    correct: &ClassDistribution,
    mode: CorruptionMode,
    seed: Seed,
) -> Result<ClassDistribution> {
    let p = correct.probs();
    match mode {
        CorruptionMode::Reflect => ClassDistribution::new(p.iter().rev().copied().collect()),
        CorruptionMode::Temper { gamma } => {
            if !gamma.is_finite() || gamma < 0.0 {
                return Err(Error::arg(format!(
                    "tempering exponent {gamma} must be >= 0"
                )));
            }
            let w: Vec<f64> = p.iter().map(|v| v.powf(gamma)).collect();
            if w.iter().sum::<f64>() > 0.0 {
                ClassDistribution::from_weights(w)
            } else {
                // Every entry underflowed; fall back to the hardest class.
                crate::data::one_hot(correct.argmax(), p.len())
            }
        }
        CorruptionMode::Permute => {
            let mut v = p.to_vec();
            seed.rng().shuffle(&mut v);
            ClassDistribution::new(v)
        }
    }
}
