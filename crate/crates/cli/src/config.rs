//! Resolved per-command run configurations. Each is read from JSON (unknown
//! keys rejected), patched with command-line flags and validated before any
//! computation starts.

use std::path::PathBuf;

use anyhow::{bail, Result};
use problabel::experiments::{default_n_values, DistillConfig, MixtureSpec, Strategy, SweepConfig};
use problabel::trainers::{NetworkSpec, TrainConfig, DEFAULT_LAMBDA_GRID};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 2024;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment1Config {
    pub seed: u64,
    pub mixture: MixtureSpec,
    pub n_values: Vec<usize>,
    pub imbalance_majority: usize,
    pub imbalance_minority: Vec<usize>,
    pub imbalance_strategies: Vec<Strategy>,
    /// Training size of the sample behind the example decision boundaries.
    pub example_n: usize,
    pub boundary: GridConfig,
    pub sweep: SweepConfig,
}

impl Default for Experiment1Config {
    fn default() -> Self {
        Experiment1Config {
            seed: DEFAULT_SEED,
            mixture: MixtureSpec::experiment1(),
            n_values: default_n_values(),
            imbalance_majority: 10,
            imbalance_minority: (1..=10).collect(),
            imbalance_strategies: vec![Strategy::Hard, Strategy::CorrectProb],
            example_n: 10,
            boundary: GridConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl Experiment1Config {
    pub fn validate(&self) -> Result<()> {
        self.mixture.validate()?;
        self.sweep.validate()?;
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n == 0 || n % 2 == 1) {
            bail!("n_values must be non-empty, even and positive");
        }
        if self.imbalance_minority.is_empty()
            || self
                .imbalance_minority
                .iter()
                .any(|&m| m == 0 || m > self.imbalance_majority)
        {
            bail!("imbalance_minority values must lie in [1, imbalance_majority]");
        }
        if self.imbalance_strategies.is_empty() {
            bail!("imbalance_strategies must be non-empty");
        }
        if self.example_n == 0 || self.example_n % 2 == 1 {
            bail!("example_n must be even and positive");
        }
        self.boundary.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub resolution: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x_range: [1.0, 8.0],
            y_range: [0.0, 7.0],
            resolution: 101,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("x_range", self.x_range), ("y_range", self.y_range)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                bail!("{name} must be finite with lo < hi");
            }
        }
        if self.resolution < 2 {
            bail!("resolution must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillRunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub distill: DistillConfig,
}

impl Default for DistillRunConfig {
    fn default() -> Self {
        DistillRunConfig {
            seed: DEFAULT_SEED,
            distill: DistillConfig::default(),
        }
    }
}

impl DistillRunConfig {
    pub fn validate(&self) -> Result<()> {
        Ok(self.distill.validate()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub scores: Option<PathBuf>,
    pub bins: usize,
    pub groups: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            scores: None,
            bins: 10,
            groups: 10,
        }
    }
}

impl EvaluateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scores.is_none() {
            bail!("a score file is required (--scores or \"scores\" in the config)");
        }
        if self.bins == 0 || self.groups == 0 {
            bail!("bins and groups must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub grid: GridConfig,
}

impl BoundaryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model.is_none() {
            bail!("a model file is required (--model or \"model\" in the config)");
        }
        self.grid.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvLambdaConfig {
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    /// Standardize feature inputs with training statistics before fitting.
    pub standardize: bool,
    /// Defaults to logistic regression for features and the reduced CNN for images.
    pub network: Option<NetworkSpec>,
    pub train: TrainConfig,
}

impl Default for CvLambdaConfig {
    fn default() -> Self {
        CvLambdaConfig {
            seed: DEFAULT_SEED,
            data: None,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            folds: 5,
            standardize: true,
            network: None,
            train: TrainConfig::mixture_logistic(),
        }
    }
}

impl CvLambdaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.data.is_none() {
            bail!("a dataset is required (--data or \"data\" in the config)");
        }
        if self.lambda_grid.is_empty()
            || self
                .lambda_grid
                .iter()
                .any(|l| !(l.is_finite() && *l >= 0.0))
        {
            bail!("lambda_grid must be non-empty with finite values >= 0");
        }
        if self.folds < 2 {
            bail!("folds must be at least 2");
        }
        self.train.validate()?;
        Ok(())
    }
}
