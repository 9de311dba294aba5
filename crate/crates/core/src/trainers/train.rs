//! Seeded mini-batch gradient descent and the two-stage procedure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{one_hot, stratified_folds, Dataset};
use crate::error::{Error, Result};
use crate::prob_label::smooth_labels;
use crate::rng::Seed;

use super::network::{Network, NetworkSpec, Parameters};

const TAG_INIT: u64 = 0x1;
const TAG_SHUFFLE: u64 = 0x2;
const TAG_FOLDS: u64 = 0x3;

/// Rows per chunk when predicting, to bound activation memory.
const PREDICT_CHUNK: usize = 256;

/// Default candidate grid for [`cross_validate_lambda`].
pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [0.0, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStrategy {
    /// One-hot targets from the hard labels.
    Hard,
    /// Hard labels smoothed with `epsilon_smoothing`.
    Soft,
    /// The dataset's soft labels.
    Probabilistic,
    /// Hard targets plus `lambda * |theta - anchor|^2`.
    Regularized,
}

/// Starting point of [`train`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Seeded Glorot-uniform weights, zero biases.
    GlorotUniform,
    /// All parameters zero.
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Mini-batch size; 0 means full batch.
    pub batch_size: usize,
    pub lambda: f64,
    pub epsilon_smoothing: f64,
    pub weight_decay: f64,
    pub seed: Seed,
    /// Stop early once the epoch loss changes by less than this. 0 disables.
    pub convergence_tol: f64,
    pub label_strategy: LabelStrategy,
    pub init: Initialization,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 32,
            lambda: 0.0,
            epsilon_smoothing: 0.1,
            weight_decay: 0.0,
            seed: Seed(0),
            convergence_tol: 0.0,
            label_strategy: LabelStrategy::Hard,
            init: Initialization::GlorotUniform,
        }
    }
}

impl TrainConfig {
    /// Settings for the Newton fit of the logistic feature model:
    /// `epochs` caps the iterations, `convergence_tol` bounds the gradient norm.
    pub fn logistic_feature_model() -> Self {
        TrainConfig {
            epochs: 100,
            weight_decay: 1e-3,
            convergence_tol: 1e-9,
            ..TrainConfig::default()
        }
    }

    /// Full-batch logistic regression on standardized 2-D features, started
    /// at zero.
    pub fn mixture_logistic() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 500,
            batch_size: 0,
            init: Initialization::Zeros,
            ..TrainConfig::default()
        }
    }

    pub fn with_strategy(&self, strategy: LabelStrategy) -> Self {
        TrainConfig {
            label_strategy: strategy,
            ..self.clone()
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        TrainConfig {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: Seed) -> Self {
        TrainConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate {} must be > 0",
                self.learning_rate
            )));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda {} must be >= 0",
                self.lambda
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon_smoothing) {
            return Err(Error::Config(format!(
                "epsilon_smoothing {} must lie in [0, 1)",
                self.epsilon_smoothing
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::Config("convergence_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    pub params: Parameters,
    /// Mean training objective per completed epoch, measured during the pass.
    pub loss_trace: Vec<f64>,
}

impl TrainOutput {
    /// `epoch,loss` CSV, epochs numbered from 1.
    pub fn loss_trace_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in self.loss_trace.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, l));
        }
        s
    }
}

/// Training targets for every instance, `n x K` row-major.
pub fn resolve_targets(data: &Dataset, config: &TrainConfig) -> Result<Vec<f64>> {
    let k = data.num_classes();
    let mut out = Vec::with_capacity(data.len() * k);
    match config.label_strategy {
        LabelStrategy::Hard | LabelStrategy::Regularized => {
            for &y in data.hard_labels() {
                out.extend_from_slice(one_hot(y, k)?.probs());
            }
        }
        LabelStrategy::Soft => {
            for &y in data.hard_labels() {
                out.extend_from_slice(
                    smooth_labels(&one_hot(y, k)?, config.epsilon_smoothing)?.probs(),
                );
            }
        }
        LabelStrategy::Probabilistic => {
            let soft = data
                .soft_labels()
                .ok_or_else(|| Error::Config("probabilistic strategy needs soft labels".into()))?;
            for s in soft {
                out.extend_from_slice(s.probs());
            }
        }
    }
    Ok(out)
}

fn check_compatible(net: &Network, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.num_classes() != net.num_classes() {
        return Err(Error::shape(format!(
            "dataset has K = {}, network outputs {}",
            data.num_classes(),
            net.num_classes()
        )));
    }
    let row = data.input_row(0).len();
    if row != net.input_len() {
        return Err(Error::shape(format!(
            "dataset rows have {row} values, network expects {}",
            net.input_len()
        )));
    }
    Ok(())
}

/// Trains from the seeded initialization. See [`train_from`].
pub fn train(
    spec: &NetworkSpec,
    data: &Dataset,
    config: &TrainConfig,
    anchor: Option<&Parameters>,
) -> Result<TrainOutput> {
    let net = Network::new(spec.clone())?;
    train_network(&net, data, config, None, anchor)
}

/// Runs `config.epochs` epochs of seeded mini-batch gradient descent starting
/// at `init`.
///
/// Each step moves along the data gradient (plus `2 * weight_decay * theta`).
/// For the regularized strategy with `lambda > 0` the penalty is then applied
/// exactly as its proximal map,
/// `theta <- anchor + (theta - anchor) / (1 + 2 * lr * lambda)`,
/// which keeps the update stable for any `lambda` and has the same fixed
/// points as gradient descent on the penalized loss.
pub fn train_from(
    spec: &NetworkSpec,
    data: &Dataset,
    config: &TrainConfig,
    init: Parameters,
    anchor: Option<&Parameters>,
) -> Result<TrainOutput> {
    let net = Network::new(spec.clone())?;
    train_network(&net, data, config, Some(init), anchor)
}

pub(crate) fn train_network(
    net: &Network,
    data: &Dataset,
    config: &TrainConfig,
    init: Option<Parameters>,
    anchor: Option<&Parameters>,
) -> Result<TrainOutput> {
    config.validate()?;
    check_compatible(net, data)?;
    let anchor = match config.label_strategy {
        LabelStrategy::Regularized => {
            let a = anchor
                .ok_or_else(|| Error::Config("regularized strategy needs an anchor".into()))?;
            if a.layout != net.layout() {
                return Err(Error::shape("anchor layout does not match the network"));
            }
            Some(a)
        }
        _ => None,
    };
    let targets = resolve_targets(data, config)?;
    let mut params = match init {
        Some(p) => {
            if p.layout != net.layout() {
                return Err(Error::shape("initial parameters do not match the network"));
            }
            p
        }
        None => match config.init {
            Initialization::GlorotUniform => net.init_params(config.seed.derive(&[TAG_INIT])),
            Initialization::Zeros => net.zero_params(),
        },
    };

    let n = data.len();
    let k = net.num_classes();
    let d = net.input_len();
    let batch = if config.batch_size == 0 {
        n
    } else {
        config.batch_size.min(n)
    };
    let lr = config.learning_rate;
    let wd = config.weight_decay;
    let shrink = anchor
        .filter(|_| config.lambda > 0.0)
        .map(|a| (a, 1.0 / (1.0 + 2.0 * lr * config.lambda)));

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = config.seed.derive(&[TAG_SHUFFLE]).rng();
    let mut xb = Vec::with_capacity(batch * d);
    let mut tb = Vec::with_capacity(batch * k);
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            xb.clear();
            tb.clear();
            for &i in chunk {
                xb.extend_from_slice(data.input_row(i));
                tb.extend_from_slice(&targets[i * k..(i + 1) * k]);
            }
            let g = net.loss_and_gradient(&params, &xb, &tb, None)?;
            let mut loss = g.loss;
            if wd > 0.0 {
                loss += wd * params.values.iter().map(|v| v * v).sum::<f64>();
            }
            if let Some((a, _)) = shrink {
                loss += config.lambda * params.squared_distance(a)?;
            }
            for (p, gv) in params.values.iter_mut().zip(&g.values) {
                *p -= lr * (gv + 2.0 * wd * *p);
            }
            if let Some((a, s)) = shrink {
                for (p, q) in params.values.iter_mut().zip(&a.values) {
                    *p = q + (*p - q) * s;
                }
            }
            epoch_loss += loss * chunk.len() as f64;
        }
        let epoch_loss = epoch_loss / n as f64;
        if !epoch_loss.is_finite() || params.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!(
                "non-finite loss at epoch {}",
                epoch + 1
            )));
        }
        let prev = trace.last().copied();
        trace.push(epoch_loss);
        if let Some(prev) = prev {
            if config.convergence_tol > 0.0 && (prev - epoch_loss).abs() < config.convergence_tol {
                break;
            }
        }
    }
    Ok(TrainOutput {
        params,
        loss_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOutput {
    pub theta_p: TrainOutput,
    pub theta_final: TrainOutput,
}

/// Stage 1 fits the probabilistic labels to obtain `theta_p`; stage 2
/// continues from `theta_p` on hard labels with the anchor penalty.
/// `config.label_strategy` is ignored; both stages use `config.seed`.
pub fn train_two_stage(
    spec: &NetworkSpec,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<TwoStageOutput> {
    let net = Network::new(spec.clone())?;
    two_stage_network(&net, data, config)
}

pub(crate) fn two_stage_network(
    net: &Network,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<TwoStageOutput> {
    let stage1 = train_network(
        net,
        data,
        &config.with_strategy(LabelStrategy::Probabilistic),
        None,
        None,
    )?;
    let stage2 = train_network(
        net,
        data,
        &config.with_strategy(LabelStrategy::Regularized),
        Some(stage1.params.clone()),
        Some(&stage1.params),
    )?;
    Ok(TwoStageOutput {
        theta_p: stage1,
        theta_final: stage2,
    })
}

/// Outcome of [`cross_validate_lambda`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub candidates: Vec<f64>,
    /// Mean validation accuracy of each candidate across folds.
    pub mean_accuracy: Vec<f64>,
}

/// Chooses `lambda` by stratified k-fold cross-validation of the two-stage
/// procedure. Within a fold, stage 1 runs once and every candidate reuses its
/// `theta_p`. Ties go to the larger `lambda`.
pub fn cross_validate_lambda(
    spec: &NetworkSpec,
    data: &Dataset,
    candidates: &[f64],
    folds: usize,
    config: &TrainConfig,
) -> Result<LambdaSelection> {
    if candidates.is_empty() {
        return Err(Error::arg("no lambda candidates"));
    }
    if candidates.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::arg("lambda candidates must be finite and >= 0"));
    }
    let net = Network::new(spec.clone())?;
    check_compatible(&net, data)?;
    if data.soft_labels().is_none() {
        return Err(Error::Config("cross-validation needs soft labels".into()));
    }
    if candidates.len() == 1 {
        return Ok(LambdaSelection {
            lambda: candidates[0],
            candidates: candidates.to_vec(),
            mean_accuracy: vec![f64::NAN],
        });
    }
    let parts = stratified_folds(
        data.hard_labels(),
        data.num_classes(),
        folds,
        config.seed.derive(&[TAG_FOLDS]),
    )?;
    let n = data.len();

    let per_fold: Vec<Vec<f64>> = parts
        .par_iter()
        .map(|val_idx| {
            let mut in_val = vec![false; n];
            val_idx.iter().for_each(|&i| in_val[i] = true);
            let train_idx: Vec<usize> = (0..n).filter(|&i| !in_val[i]).collect();
            let train_set = data.subset(&train_idx);
            let val_set = data.subset(val_idx);
            let stage1 = train_network(
                &net,
                &train_set,
                &config.with_strategy(LabelStrategy::Probabilistic),
                None,
                None,
            )?;
            candidates
                .iter()
                .map(|&lambda| {
                    let cfg = config
                        .with_strategy(LabelStrategy::Regularized)
                        .with_lambda(lambda);
                    let out = train_network(
                        &net,
                        &train_set,
                        &cfg,
                        Some(stage1.params.clone()),
                        Some(&stage1.params),
                    )?;
                    let pred = predict_classes_network(&net, &out.params, &val_set)?;
                    let correct = pred
                        .iter()
                        .zip(val_set.hard_labels())
                        .filter(|(a, b)| a == b)
                        .count();
                    Ok(correct as f64 / val_set.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_accuracy: Vec<f64> = (0..candidates.len())
        .map(|c| per_fold.iter().map(|f| f[c]).sum::<f64>() / per_fold.len() as f64)
        .collect();
    let mut best = 0;
    for c in 1..candidates.len() {
        let (a, b) = (mean_accuracy[c], mean_accuracy[best]);
        let tie = (a - b).abs() <= 1e-12;
        if a > b + 1e-12 || (tie && candidates[c] > candidates[best]) {
            best = c;
        }
    }
    Ok(LambdaSelection {
        lambda: candidates[best],
        candidates: candidates.to_vec(),
        mean_accuracy,
    })
}

/// Class probabilities for every instance, `n x K` row-major.
pub fn predict_proba(spec: &NetworkSpec, params: &Parameters, data: &Dataset) -> Result<Vec<f64>> {
    let net = Network::new(spec.clone())?;
    predict_proba_network(&net, params, data)
}

pub(crate) fn predict_proba_network(
    net: &Network,
    params: &Parameters,
    data: &Dataset,
) -> Result<Vec<f64>> {
    check_compatible(net, data)?;
    let mut out = Vec::with_capacity(data.len() * net.num_classes());
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut buf = Vec::new();
    for chunk in idx.chunks(PREDICT_CHUNK) {
        buf.clear();
        for &i in chunk {
            buf.extend_from_slice(data.input_row(i));
        }
        out.extend(net.predict_batch(params, &buf)?);
    }
    Ok(out)
}

/// Probability of class 1 for each instance of a binary dataset.
pub fn predict_scores(spec: &NetworkSpec, params: &Parameters, data: &Dataset) -> Result<Vec<f64>> {
    let net = Network::new(spec.clone())?;
    predict_scores_network(&net, params, data)
}

pub(crate) fn predict_scores_network(
    net: &Network,
    params: &Parameters,
    data: &Dataset,
) -> Result<Vec<f64>> {
    if net.num_classes() != 2 {
        return Err(Error::Unsupported("scores need a binary network".into()));
    }
    Ok(predict_proba_network(net, params, data)?
        .chunks(2)
        .map(|p| p[1])
        .collect())
}

/// Predicted class per instance: threshold 0.5 (ties positive) for binary
/// networks, argmax otherwise.
pub(crate) fn predict_classes_network(
    net: &Network,
    params: &Parameters,
    data: &Dataset,
) -> Result<Vec<usize>> {
    let k = net.num_classes();
    let probs = predict_proba_network(net, params, data)?;
    Ok(probs
        .chunks(k)
        .map(|p| {
            if k == 2 {
                usize::from(p[1] >= 0.5)
            } else {
                let mut best = 0;
                for (i, &v) in p.iter().enumerate() {
                    if v > p[best] {
                        best = i;
                    }
                }
                best
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClassDistribution, FeatureVector};

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = Seed(seed).rng();
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        let mut soft = Vec::new();
        for i in 0..n {
            let y = i % 2;
            let x = rng.normal() + if y == 1 { 1.0 } else { -1.0 };
            let x2 = rng.normal();
            feats.push(FeatureVector::new(vec![x, x2]).unwrap());
            labels.push(y);
            let p = crate::prob_label::sigmoid(2.0 * x);
            soft.push(ClassDistribution::new(vec![1.0 - p, p]).unwrap());
        }
        Dataset::from_features(feats, labels, 2)
            .unwrap()
            .with_soft_labels(soft)
            .unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 50,
            batch_size: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(TrainConfig { epochs: 0, ..cfg() }.validate().is_err());
        assert!(TrainConfig {
            lambda: -1.0,
            ..cfg()
        }
        .validate()
        .is_err());
        let parsed: TrainConfig =
            serde_json::from_str(r#"{"epochs": 3, "label_strategy": "soft"}"#).unwrap();
        assert_eq!(parsed.epochs, 3);
        assert_eq!(parsed.label_strategy, LabelStrategy::Soft);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
    }

    #[test]
    fn strategy_errors() {
        let spec = NetworkSpec::logistic(2);
        let data = toy(20, 1).without_soft_labels();
        let prob = cfg().with_strategy(LabelStrategy::Probabilistic);
        assert!(matches!(
            train(&spec, &data, &prob, None),
            Err(Error::Config(_))
        ));
        let reg = cfg().with_strategy(LabelStrategy::Regularized);
        assert!(matches!(
            train(&spec, &data, &reg, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn soft_targets_are_smoothed() {
        let data = toy(4, 1);
        let t = resolve_targets(&data, &cfg().with_strategy(LabelStrategy::Soft)).unwrap();
        assert_eq!(&t[..4], &[0.9, 0.1, 0.1, 0.9]);
    }

    #[test]
    fn deterministic() {
        let spec = NetworkSpec::logistic(2);
        let data = toy(40, 2);
        let a = train(&spec, &data, &cfg(), None).unwrap();
        let b = train(&spec, &data, &cfg(), None).unwrap();
        assert_eq!(a, b);
        let c = train(&spec, &data, &cfg().with_seed(Seed(9)), None).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn zero_lambda_matches_hard() {
        let spec = NetworkSpec::logistic(2);
        let data = toy(40, 3);
        let anchor = train(
            &spec,
            &data,
            &cfg().with_strategy(LabelStrategy::Probabilistic),
            None,
        )
        .unwrap();
        let hard = train(&spec, &data, &cfg(), None).unwrap();
        let reg = train(
            &spec,
            &data,
            &cfg().with_strategy(LabelStrategy::Regularized),
            Some(&anchor.params),
        )
        .unwrap();
        assert_eq!(hard.params.values, reg.params.values);
        assert_eq!(hard.loss_trace, reg.loss_trace);
    }

    #[test]
    fn huge_lambda_pins_to_anchor() {
        let spec = NetworkSpec::logistic(2);
        let data = toy(40, 4);
        let out = train_two_stage(&spec, &data, &cfg().with_lambda(1e8)).unwrap();
        for (a, b) in out
            .theta_final
            .params
            .values
            .iter()
            .zip(&out.theta_p.params.values)
        {
            assert!((a - b).abs() < 1e-3);
        }
        let zero = train_two_stage(&spec, &data, &cfg()).unwrap();
        let fine = train_from(&spec, &data, &cfg(), zero.theta_p.params.clone(), None).unwrap();
        assert_eq!(zero.theta_final.params, fine.params);
    }

    #[test]
    fn single_candidate_is_returned() {
        let spec = NetworkSpec::logistic(2);
        let sel = cross_validate_lambda(&spec, &toy(20, 5), &[0.3], 5, &cfg()).unwrap();
        assert_eq!(sel.lambda, 0.3);
    }

    #[test]
    fn cross_validation_reports_every_candidate() {
        let spec = NetworkSpec::logistic(2);
        let sel =
            cross_validate_lambda(&spec, &toy(30, 6), &DEFAULT_LAMBDA_GRID, 3, &cfg()).unwrap();
        assert_eq!(sel.mean_accuracy.len(), DEFAULT_LAMBDA_GRID.len());
        assert!(sel.mean_accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
        assert!(DEFAULT_LAMBDA_GRID.contains(&sel.lambda));
        assert!(cross_validate_lambda(&spec, &toy(30, 6), &[], 3, &cfg()).is_err());
    }

    #[test]
    fn loss_trace_csv_layout() {
        let out = TrainOutput {
            params: crate::trainers::Network::new(NetworkSpec::logistic(1))
                .unwrap()
                .zero_params(),
            loss_trace: vec![0.5, 0.25],
        };
        assert_eq!(out.loss_trace_csv(), "epoch,loss\n1,0.5\n2,0.25\n");
    }
}
