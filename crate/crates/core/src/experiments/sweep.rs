//! Monte-Carlo sweeps over training-set size and class imbalance.
//!
//! Repetition `r` at axis index `a` draws its training data from
//! `seed.derive(&[sweep, a, r, DATA_STREAM])` and trains strategy `s` with
//! `seed.derive(&[sweep, a, r, s.id()])`, so results do not depend on the
//! order or thread in which repetitions run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClassDistribution, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, expected_calibration_error};
use crate::plot::{line_plot, LinePlot, Series};
use crate::prob_label::{corrupt_posterior, CorruptionMode, GaussianClassConditional};
use crate::rng::Seed;
use crate::trainers::{
    predict_scores_network, train_network, two_stage_network, LabelStrategy, Network, NetworkSpec,
    Parameters, TrainConfig, TrainedModel, DEFAULT_LAMBDA_GRID,
};

use super::mixture::{sample_from_model, MixtureSpec};

const SWEEP_ACCURACY: u64 = 0xA1;
const SWEEP_IMBALANCE: u64 = 0xA2;
const SWEEP_EXAMPLE: u64 = 0xA3;
const TEST_STREAM: u64 = 0xF0;
const DATA_STREAM: u64 = 0xF1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// One-hot targets.
    Hard,
    /// Targets are the generating posterior.
    CorrectProb,
    /// Targets are the misleading posterior.
    IncorrectProb,
    /// Two-stage training anchored on the misleading-label fit.
    Regularized,
    /// Two-stage training anchored on the correct-label fit.
    RegularizedCorrect,
}

impl Strategy {
    pub const PRIMARY: [Strategy; 4] = [
        Strategy::Hard,
        Strategy::CorrectProb,
        Strategy::IncorrectProb,
        Strategy::Regularized,
    ];

    pub fn id(self) -> u64 {
        match self {
            Strategy::Hard => 1,
            Strategy::CorrectProb => 2,
            Strategy::IncorrectProb => 3,
            Strategy::Regularized => 4,
            Strategy::RegularizedCorrect => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Hard => "hard",
            Strategy::CorrectProb => "correct-prob",
            Strategy::IncorrectProb => "incorrect-prob",
            Strategy::Regularized => "regularized",
            Strategy::RegularizedCorrect => "regularized-correct",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            Strategy::Hard,
            Strategy::CorrectProb,
            Strategy::IncorrectProb,
            Strategy::Regularized,
            Strategy::RegularizedCorrect,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| Error::arg(format!("unknown strategy {s:?}")))
    }
}

/// How the misleading soft labels are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncorrectLabels {
    /// Posterior of the mixture with the first two means exchanged.
    SwappedMeans,
    /// The correct posterior passed through a corruption mode.
    Corrupted { mode: CorruptionMode },
}

/// Feature standardization fitted on each training sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScaling {
    /// Per-coordinate mean and standard deviation.
    PerFeature,
    /// Per-coordinate mean, one shared scale.
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub scaling: FeatureScaling,
    pub reps: usize,
    pub strategies: Vec<Strategy>,
    /// Per-class test counts; the test set is drawn once per sweep.
    pub test_counts: Vec<usize>,
    pub train: TrainConfig,
    pub incorrect_labels: IncorrectLabels,
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
    /// Cross-validate lambda only from this training size upward
    /// (and only when every class has at least `cv_folds` instances).
    pub min_cv_n: usize,
    /// Lambda used when cross-validation is skipped.
    pub fallback_lambda: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            scaling: FeatureScaling::PerFeature,
            reps: 100,
            strategies: Strategy::PRIMARY.to_vec(),
            test_counts: vec![1000, 1000],
            train: TrainConfig::mixture_logistic(),
            incorrect_labels: IncorrectLabels::SwappedMeans,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            cv_folds: 5,
            min_cv_n: 10,
            fallback_lambda: 1.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies selected".into()));
        }
        if self.lambda_grid.is_empty()
            || self
                .lambda_grid
                .iter()
                .any(|l| !(*l >= 0.0) || !l.is_finite())
        {
            return Err(Error::Config(
                "lambda grid must be non-empty and >= 0".into(),
            ));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be >= 2".into()));
        }
        if !(self.fallback_lambda >= 0.0) {
            return Err(Error::Config("fallback_lambda must be >= 0".into()));
        }
        if self.test_counts.iter().sum::<usize>() == 0 {
            return Err(Error::Config("test set is empty".into()));
        }
        self.train.validate()
    }
}

/// Mean and sample standard deviation of one strategy's metric per axis point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySeries {
    pub strategy: Strategy,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_name: String,
    pub metric: String,
    pub axis: Vec<f64>,
    pub series: Vec<StrategySeries>,
    pub reps: usize,
}

impl SweepResult {
    pub fn series(&self, s: Strategy) -> Option<&StrategySeries> {
        self.series.iter().find(|x| x.strategy == s)
    }

    /// Long-form `axis,strategy,rep_mean,rep_std,reps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,strategy,rep_mean,rep_std,reps\n");
        for (i, a) in self.axis.iter().enumerate() {
            for s in &self.series {
                out.push_str(&format!(
                    "{a},{},{},{},{}\n",
                    s.strategy.name(),
                    s.mean[i],
                    s.std[i],
                    self.reps
                ));
            }
        }
        out
    }

    pub fn to_svg(&self, title: &str) -> String {
        line_plot(&LinePlot {
            title: title.into(),
            x_label: self.axis_name.clone(),
            y_label: self.metric.clone(),
            series: self
                .series
                .iter()
                .map(|s| Series {
                    name: s.strategy.name().into(),
                    xs: self.axis.clone(),
                    ys: s.mean.clone(),
                    err: Some(s.std.clone()),
                })
                .collect(),
            diagonal: false,
        })
    }
}

#[derive(Clone, Copy)]
enum Metric {
    Accuracy,
    Ece,
}

struct Context<'a> {
    model: GaussianClassConditional,
    swapped: GaussianClassConditional,
    test: Dataset,
    config: &'a SweepConfig,
    net: Network,
    seed: Seed,
    sweep: u64,
    metric: Metric,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Prepared {
    scaler: Standardizer,
    with_correct: Dataset,
    with_wrong: Dataset,
    min_class: usize,
}

impl Context<'_> {
    fn new<'a>(
        spec: &MixtureSpec,
        config: &'a SweepConfig,
        seed: Seed,
        sweep: u64,
        metric: Metric,
    ) -> Result<Context<'a>> {
        config.validate()?;
        let model = spec.model()?;
        if model.num_classes() != 2 {
            return Err(Error::Unsupported(
                "sweeps use a two-component mixture".into(),
            ));
        }
        let swapped = model.with_swapped_means(0, 1)?;
        let test = sample_from_model(
            &model,
            &config.test_counts,
            seed.derive(&[sweep, TEST_STREAM]),
        )?;
        let net = Network::new(NetworkSpec::logistic(model.dim()))?;
        Ok(Context {
            model,
            swapped,
            test,
            config,
            net,
            seed,
            sweep,
            metric,
        })
    }

    fn incorrect(
        &self,
        correct: &ClassDistribution,
        z: &crate::data::FeatureVector,
        seed: Seed,
    ) -> Result<ClassDistribution> {
        match self.config.incorrect_labels {
            IncorrectLabels::SwappedMeans => self.swapped.posterior(z),
            IncorrectLabels::Corrupted { mode } => corrupt_posterior(correct, mode, seed),
        }
    }

    /// Standardized training data with correct and misleading soft labels.
    fn prepare(&self, raw: &Dataset, base: Seed) -> Result<Prepared> {
        let feats = raw.features().expect("mixture data has features");
        let mut correct = Vec::with_capacity(raw.len());
        let mut wrong = Vec::with_capacity(raw.len());
        for (i, z) in feats.iter().enumerate() {
            let c = self.model.posterior(z)?;
            wrong.push(self.incorrect(&c, z, base.derive(&[DATA_STREAM, i as u64]))?);
            correct.push(c);
        }
        let rows: Vec<&[f64]> = (0..raw.len()).map(|i| raw.input_row(i)).collect();
        let scaler = match self.config.scaling {
            FeatureScaling::PerFeature => Standardizer::fit(&rows)?,
            FeatureScaling::Isotropic => Standardizer::fit_isotropic(&rows)?,
        };
        let train = scaler.apply(raw)?;
        Ok(Prepared {
            with_correct: train.clone().with_soft_labels(correct)?,
            with_wrong: train.with_soft_labels(wrong)?,
            min_class: raw.class_counts().into_iter().min().unwrap_or(0),
            scaler,
        })
    }

    fn fit(&self, s: Strategy, prep: &Prepared, base: Seed) -> Result<Parameters> {
        let cfg = self.config.train.with_seed(base.derive(&[s.id()]));
        let n = prep.with_correct.len();
        Ok(match s {
            Strategy::Hard => {
                train_network(
                    &self.net,
                    &prep.with_correct,
                    &cfg.with_strategy(LabelStrategy::Hard),
                    None,
                    None,
                )?
                .params
            }
            Strategy::CorrectProb => {
                let cfg = cfg.with_strategy(LabelStrategy::Probabilistic);
                train_network(&self.net, &prep.with_correct, &cfg, None, None)?.params
            }
            Strategy::IncorrectProb => {
                let cfg = cfg.with_strategy(LabelStrategy::Probabilistic);
                train_network(&self.net, &prep.with_wrong, &cfg, None, None)?.params
            }
            Strategy::Regularized | Strategy::RegularizedCorrect => {
                let data = if s == Strategy::Regularized {
                    &prep.with_wrong
                } else {
                    &prep.with_correct
                };
                let lambda = if n >= self.config.min_cv_n && prep.min_class >= self.config.cv_folds
                {
                    crate::trainers::cross_validate_lambda(
                        self.net.spec(),
                        data,
                        &self.config.lambda_grid,
                        self.config.cv_folds,
                        &cfg,
                    )?
                    .lambda
                } else {
                    self.config.fallback_lambda
                };
                two_stage_network(&self.net, data, &cfg.with_lambda(lambda))?
                    .theta_final
                    .params
            }
        })
    }

    /// Metric of every strategy for one repetition.
    fn repetition(&self, axis_idx: usize, rep: usize, counts: &[usize]) -> Result<Vec<f64>> {
        let base = self.seed.derive(&[self.sweep, axis_idx as u64, rep as u64]);
        let raw = sample_from_model(&self.model, counts, base.derive(&[DATA_STREAM]))?;
        let prep = self.prepare(&raw, base)?;
        let test = prep.scaler.apply(&self.test)?;
        self.config
            .strategies
            .iter()
            .map(|&s| {
                let params = self.fit(s, &prep, base)?;
                let scores = predict_scores_network(&self.net, &params, &test)?;
                match self.metric {
                    Metric::Accuracy => accuracy(&scores, test.hard_labels(), 0.5),
                    Metric::Ece => expected_calibration_error(&scores, test.hard_labels(), 10),
                }
            })
            .collect()
    }

    fn run(
        &self,
        axis_name: &str,
        metric_name: &str,
        axis: Vec<f64>,
        counts: Vec<Vec<usize>>,
    ) -> Result<SweepResult> {
        let reps = self.config.reps;
        let jobs: Vec<(usize, usize)> = (0..counts.len())
            .flat_map(|a| (0..reps).map(move |r| (a, r)))
            .collect();
        let results: Vec<Vec<f64>> = jobs
            .par_iter()
            .map(|&(a, r)| self.repetition(a, r, &counts[a]))
            .collect::<Result<_>>()?;
        let series = self
            .config
            .strategies
            .iter()
            .enumerate()
            .map(|(si, &strategy)| {
                let (mean, std) = (0..counts.len())
                    .map(|a| {
                        let vals: Vec<f64> = (0..reps).map(|r| results[a * reps + r][si]).collect();
                        mean_std(&vals)
                    })
                    .unzip();
                StrategySeries {
                    strategy,
                    mean,
                    std,
                }
            })
            .collect();
        Ok(SweepResult {
            axis_name: axis_name.into(),
            metric: metric_name.into(),
            axis,
            series,
            reps,
        })
    }
}

/// `2, 4, ..., 60`.
pub fn default_n_values() -> Vec<usize> {
    (1..=30).map(|i| 2 * i).collect()
}

/// Test accuracy against balanced training size `n` (n/2 per class).
pub fn run_accuracy_vs_n(
    spec: &MixtureSpec,
    n_values: &[usize],
    config: &SweepConfig,
    seed: Seed,
) -> Result<SweepResult> {
    if n_values.is_empty() {
        return Err(Error::arg("no training sizes"));
    }
    if let Some(&n) = n_values.iter().find(|&&n| n == 0 || n % 2 == 1) {
        return Err(Error::arg(format!(
            "training size {n} must be even and positive"
        )));
    }
    let ctx = Context::new(spec, config, seed, SWEEP_ACCURACY, Metric::Accuracy)?;
    let counts = n_values.iter().map(|&n| vec![n / 2, n / 2]).collect();
    ctx.run(
        "n",
        "accuracy",
        n_values.iter().map(|&n| n as f64).collect(),
        counts,
    )
}

/// Test ECE with `majority` class-0 and `m` class-1 training instances for
/// each `m` in `minority_values`. The axis holds `m / majority`.
pub fn run_imbalance_vs_ece(
    spec: &MixtureSpec,
    majority: usize,
    minority_values: &[usize],
    config: &SweepConfig,
    seed: Seed,
) -> Result<SweepResult> {
    if minority_values.is_empty() {
        return Err(Error::arg("no minority sizes"));
    }
    if let Some(&m) = minority_values.iter().find(|&&m| m == 0 || m > majority) {
        return Err(Error::arg(format!(
            "minority size {m} outside [1, {majority}]"
        )));
    }
    let ctx = Context::new(spec, config, seed, SWEEP_IMBALANCE, Metric::Ece)?;
    let counts = minority_values.iter().map(|&m| vec![majority, m]).collect();
    let axis = minority_values
        .iter()
        .map(|&m| m as f64 / majority as f64)
        .collect();
    ctx.run("imbalance ratio", "ece", axis, counts)
}

/// One training sample with a fitted 2-D model per configured strategy,
/// for drawing decision boundaries. Models carry their standardizer, so they
/// score raw features.
#[derive(Debug, Clone)]
pub struct ExampleModels {
    /// Raw (unstandardized) training sample with correct soft labels.
    pub data: Dataset,
    pub models: Vec<(Strategy, TrainedModel)>,
}

/// Fits every strategy of `config` on one balanced sample of size `n`.
pub fn fit_example_models(
    spec: &MixtureSpec,
    n: usize,
    config: &SweepConfig,
    seed: Seed,
) -> Result<ExampleModels> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::arg(format!(
            "training size {n} must be even and positive"
        )));
    }
    let ctx = Context::new(spec, config, seed, SWEEP_EXAMPLE, Metric::Accuracy)?;
    let base = seed.derive(&[SWEEP_EXAMPLE]);
    let raw = sample_from_model(&ctx.model, &[n / 2, n / 2], base.derive(&[DATA_STREAM]))?;
    let prep = ctx.prepare(&raw, base)?;
    let models = config
        .strategies
        .iter()
        .map(|&s| {
            let params = ctx.fit(s, &prep, base)?;
            Ok((
                s,
                TrainedModel::new(ctx.net.spec().clone(), params, Some(prep.scaler.clone()))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let soft = prep
        .with_correct
        .soft_labels()
        .expect("soft labels attached")
        .to_vec();
    Ok(ExampleModels {
        data: raw.with_soft_labels(soft)?,
        models,
    })
}
