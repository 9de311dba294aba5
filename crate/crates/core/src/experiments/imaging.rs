//! Synthetic grayscale images whose class is carried by the mean intensity
//! of a few rectangular regions, and the distillation experiment on them.

use serde::{Deserialize, Serialize};

use crate::data::{split_indices, Dataset, FeatureVector, ImageGrid, Inputs, Standardizer};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::prob_label::{fit_logistic_feature_model, logistic_posterior, LogisticFeatureModel};
use crate::rng::Seed;
use crate::trainers::{
    cross_validate_lambda, predict_scores_network, train_network, LabelStrategy, LambdaSelection,
    Network, NetworkSpec, Parameters, TrainConfig, TrainOutput, DEFAULT_LAMBDA_GRID,
};

const TAG_IMAGES: u64 = 0xB1;
const TAG_SPLIT: u64 = 0xB2;
const TAG_TRAIN: u64 = 0xB3;

/// Axis-aligned rectangle, top-left corner inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roi {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Roi {
    fn fits(&self, h: usize, w: usize) -> bool {
        self.height > 0
            && self.width > 0
            && self.top + self.height <= h
            && self.left + self.width <= w
    }

    fn overlaps(&self, o: &Roi) -> bool {
        self.top < o.top + o.height
            && o.top < self.top + self.height
            && self.left < o.left + o.width
            && o.left < self.left + self.width
    }

    fn contains(&self, r: usize, c: usize) -> bool {
        (self.top..self.top + self.height).contains(&r)
            && (self.left..self.left + self.width).contains(&c)
    }
}

/// Normal distribution of one ROI's intensity offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetDist {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticImageConfig {
    pub height: usize,
    pub width: usize,
    pub rois: Vec<Roi>,
    /// `offsets[k][r]`: offset of ROI `r` for class `k`.
    pub offsets: Vec<Vec<OffsetDist>>,
    pub base_intensity: f64,
    /// Amplitude of a fixed sinusoidal background texture.
    pub texture_amplitude: f64,
    pub noise_sd: f64,
    /// Probability of class 0.
    pub prior_class0: f64,
}

impl Default for SyntheticImageConfig {
    fn default() -> Self {
        let sd = 0.1;
        SyntheticImageConfig {
            height: 32,
            width: 32,
            rois: vec![
                Roi {
                    top: 4,
                    left: 4,
                    height: 8,
                    width: 8,
                },
                Roi {
                    top: 4,
                    left: 20,
                    height: 8,
                    width: 8,
                },
                Roi {
                    top: 20,
                    left: 12,
                    height: 8,
                    width: 8,
                },
            ],
            offsets: vec![
                vec![OffsetDist { mean: 0.1, sd }; 3],
                vec![
                    OffsetDist { mean: 0.25, sd },
                    OffsetDist { mean: 0.0, sd },
                    OffsetDist { mean: 0.0, sd },
                ],
            ],
            base_intensity: 0.3,
            texture_amplitude: 0.03,
            noise_sd: 0.05,
            prior_class0: 0.62,
        }
    }
}

impl SyntheticImageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        if self.rois.is_empty() {
            return Err(Error::Config("at least one ROI is required".into()));
        }
        for (i, r) in self.rois.iter().enumerate() {
            if !r.fits(self.height, self.width) {
                return Err(Error::Config(format!("ROI {i} is outside the image")));
            }
            for (j, o) in self.rois.iter().enumerate().skip(i + 1) {
                if r.overlaps(o) {
                    return Err(Error::Config(format!("ROIs {i} and {j} overlap")));
                }
            }
        }
        if self.offsets.len() != 2 || self.offsets.iter().any(|o| o.len() != self.rois.len()) {
            return Err(Error::Config(
                "offsets must be 2 classes x one entry per ROI".into(),
            ));
        }
        if self
            .offsets
            .iter()
            .flatten()
            .any(|o| !o.mean.is_finite() || !(o.sd >= 0.0))
        {
            return Err(Error::Config(
                "offset distributions need finite mean and sd >= 0".into(),
            ));
        }
        if !(self.noise_sd >= 0.0)
            || !(self.texture_amplitude >= 0.0)
            || !self.base_intensity.is_finite()
        {
            return Err(Error::Config(
                "noise, texture and base intensity must be valid".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.prior_class0) {
            return Err(Error::Config("prior_class0 must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn texture(&self, r: usize, c: usize) -> f64 {
        let (fy, fx) = (r as f64 / self.height as f64, c as f64 / self.width as f64);
        self.texture_amplitude
            * (std::f64::consts::TAU * 2.0 * fx).sin()
            * (std::f64::consts::TAU * fy).cos()
    }
}

/// Mean intensity of each ROI, in layout order.
pub fn extract_roi_means(image: &ImageGrid, rois: &[Roi]) -> Result<FeatureVector> {
    let mut out = Vec::with_capacity(rois.len());
    for (i, r) in rois.iter().enumerate() {
        if !r.fits(image.height(), image.width()) {
            return Err(Error::arg(format!("ROI {i} lies outside the image")));
        }
        let mut s = 0.0;
        for row in r.top..r.top + r.height {
            let line = &image.intensities()
                [row * image.width() + r.left..row * image.width() + r.left + r.width];
            s += line.iter().sum::<f64>();
        }
        out.push(s / (r.height * r.width) as f64);
    }
    FeatureVector::new(out)
}

/// Generates `n` labelled images and their noiseless ROI means.
///
/// Pixel = base + texture + (offset of the ROI containing it, if any) +
/// noise, clipped to [0, 1]. The paired feature vector holds the ROI means
/// of the same image before noise and clipping.
pub fn generate_synthetic_images(
    config: &SyntheticImageConfig,
    n: usize,
    seed: Seed,
) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let (h, w) = (config.height, config.width);
    let mut owner = vec![usize::MAX; h * w];
    for (i, roi) in config.rois.iter().enumerate() {
        for r in 0..h {
            for c in 0..w {
                if roi.contains(r, c) {
                    owner[r * w + c] = i;
                }
            }
        }
    }
    let clean_base: Vec<f64> = (0..h * w)
        .map(|p| config.base_intensity + config.texture(p / w, p % w))
        .collect();
    let base_roi_means: Vec<f64> = config
        .rois
        .iter()
        .map(|roi| {
            // Unclipped mean of the background inside the ROI.
            let mut s = 0.0;
            for r in roi.top..roi.top + roi.height {
                for c in roi.left..roi.left + roi.width {
                    s += clean_base[r * w + c];
                }
            }
            s / (roi.height * roi.width) as f64
        })
        .collect();

    let mut rng = seed.derive(&[TAG_IMAGES]).rng();
    let mut images = Vec::with_capacity(n);
    let mut feats = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = usize::from(!rng.bernoulli(config.prior_class0));
        let offs: Vec<f64> = config.offsets[y]
            .iter()
            .map(|o| rng.normal_with(o.mean, o.sd))
            .collect();
        let mut px = Vec::with_capacity(h * w);
        for (p, &b) in clean_base.iter().enumerate() {
            let off = if owner[p] == usize::MAX {
                0.0
            } else {
                offs[owner[p]]
            };
            let noise = if config.noise_sd > 0.0 {
                rng.normal_with(0.0, config.noise_sd)
            } else {
                0.0
            };
            px.push((b + off + noise).clamp(0.0, 1.0));
        }
        images.push(ImageGrid::new(h, w, px)?);
        feats.push(FeatureVector::new(
            base_roi_means
                .iter()
                .zip(&offs)
                .map(|(b, o)| b + o)
                .collect(),
        )?);
        labels.push(y);
    }
    let image_ds = Dataset::new(Inputs::Images(images), labels.clone(), None, 2)?;
    let feat_ds = Dataset::from_features(feats, labels, 2)?;
    Ok((image_ds, feat_ds))
}

/// Feature-space teacher: standardization followed by a logistic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTeacher {
    pub standardizer: Standardizer,
    pub model: LogisticFeatureModel,
}

impl FeatureTeacher {
    pub fn fit(features: &Dataset, config: &TrainConfig) -> Result<Self> {
        let standardizer = Standardizer::fit_dataset(features)?;
        let scaled = standardizer.apply(features)?;
        let model = fit_logistic_feature_model(
            scaled.features().expect("feature dataset"),
            scaled.hard_labels(),
            config,
        )?;
        Ok(FeatureTeacher {
            standardizer,
            model,
        })
    }

    pub fn posterior(&self, z: &FeatureVector) -> Result<crate::data::ClassDistribution> {
        logistic_posterior(
            &self.model,
            &FeatureVector::new(self.standardizer.transform(z.values()))?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillStrategy {
    Hard,
    Soft,
    Prob,
    Reg,
}

impl DistillStrategy {
    pub const ALL: [DistillStrategy; 4] = [
        DistillStrategy::Hard,
        DistillStrategy::Soft,
        DistillStrategy::Prob,
        DistillStrategy::Reg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistillStrategy::Hard => "hard",
            DistillStrategy::Soft => "soft",
            DistillStrategy::Prob => "prob",
            DistillStrategy::Reg => "reg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    pub images: SyntheticImageConfig,
    pub n: usize,
    pub train_fraction: f64,
    /// Image-network training; `label_strategy` and `lambda` are set per arm.
    pub train: TrainConfig,
    pub feature_model: TrainConfig,
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            images: SyntheticImageConfig::default(),
            n: 505,
            train_fraction: 0.7,
            train: TrainConfig {
                learning_rate: 0.05,
                epochs: 80,
                batch_size: 16,
                epsilon_smoothing: 0.1,
                ..TrainConfig::default()
            },
            feature_model: TrainConfig::logistic_feature_model(),
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            cv_folds: 3,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        self.images.validate()?;
        self.train.validate()?;
        if self.n < 2 {
            return Err(Error::Config("n must be >= 2".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
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
        Ok(())
    }

    pub fn network(&self) -> NetworkSpec {
        NetworkSpec::reduced_cnn(self.images.height, self.images.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillArm {
    pub strategy: DistillStrategy,
    pub report: MetricsReport,
    pub training: TrainOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillResult {
    pub arms: Vec<DistillArm>,
    pub lambda: LambdaSelection,
    pub teacher: FeatureTeacher,
    pub teacher_report: MetricsReport,
    pub train_size: usize,
    pub holdout_size: usize,
}

impl DistillResult {
    pub fn arm(&self, s: DistillStrategy) -> &DistillArm {
        self.arms
            .iter()
            .find(|a| a.strategy == s)
            .expect("all arms present")
    }

    fn rows(&self) -> [(&'static str, Vec<String>); 4] {
        let cell = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Vec<String> {
            self.arms
                .iter()
                .map(|a| {
                    f(&a.report)
                        .map(|v| format!("{v:.4}"))
                        .unwrap_or_else(|| "NA".into())
                })
                .collect()
        };
        [
            ("accuracy", cell(&|r| Some(r.accuracy))),
            ("auc", cell(&|r| r.auc)),
            ("hl", cell(&|r| Some(r.hl_statistic))),
            ("ece", cell(&|r| Some(r.ece))),
        ]
    }

    /// `metric,hard,soft,prob,reg` with one row per metric.
    pub fn table_csv(&self) -> String {
        let mut s = String::from("metric");
        for a in &self.arms {
            s.push(',');
            s.push_str(a.strategy.name());
        }
        s.push('\n');
        for (name, cells) in self.rows() {
            s.push_str(name);
            for c in cells {
                s.push(',');
                s.push_str(&c);
            }
            s.push('\n');
        }
        s
    }

    /// Column-aligned version of [`Self::table_csv`].
    pub fn table_text(&self) -> String {
        let mut s = format!("{:<10}", "");
        for a in &self.arms {
            s.push_str(&format!("{:>10}", a.strategy.name()));
        }
        s.push('\n');
        for (name, cells) in self.rows() {
            s.push_str(&format!("{name:<10}"));
            for c in cells {
                s.push_str(&format!("{c:>10}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Generates images, fits the feature-space teacher on the training part,
/// labels the training images with its posteriors and trains the image
/// network under each strategy. Holdout evaluation uses pixels only.
pub fn run_distillation_experiment(config: &DistillConfig, seed: Seed) -> Result<DistillResult> {
    config.validate()?;
    let (images, features) = generate_synthetic_images(&config.images, config.n, seed)?;
    let split = split_indices(
        images.hard_labels(),
        2,
        config.train_fraction,
        seed.derive(&[TAG_SPLIT]),
        true,
    )?;
    let train_feats = features.subset(&split.train);
    let teacher = FeatureTeacher::fit(&train_feats, &config.feature_model)?;
    let soft = train_feats
        .features()
        .expect("feature dataset")
        .iter()
        .map(|z| teacher.posterior(z))
        .collect::<Result<Vec<_>>>()?;
    let train = images.subset(&split.train).with_soft_labels(soft)?;
    let holdout = images.subset(&split.holdout);

    let holdout_feats = features.subset(&split.holdout);
    let teacher_scores = holdout_feats
        .features()
        .expect("feature dataset")
        .iter()
        .map(|z| teacher.posterior(z).map(|p| p.get(1)))
        .collect::<Result<Vec<_>>>()?;
    let teacher_report = MetricsReport::compute(&teacher_scores, holdout_feats.hard_labels())?;

    let spec = config.network();
    let net = Network::new(spec.clone())?;
    let base = config.train.with_seed(seed.derive(&[TAG_TRAIN]));
    let lambda = cross_validate_lambda(&spec, &train, &config.lambda_grid, config.cv_folds, &base)?;

    let evaluate = |params: &Parameters| -> Result<MetricsReport> {
        let scores = predict_scores_network(&net, params, &holdout)?;
        MetricsReport::compute(&scores, holdout.hard_labels())
    };
    let hard = train_network(
        &net,
        &train,
        &base.with_strategy(LabelStrategy::Hard),
        None,
        None,
    )?;
    let soft = train_network(
        &net,
        &train,
        &base.with_strategy(LabelStrategy::Soft),
        None,
        None,
    )?;
    let prob = train_network(
        &net,
        &train,
        &base.with_strategy(LabelStrategy::Probabilistic),
        None,
        None,
    )?;
    // Stage 1 of the two-stage procedure is exactly the probabilistic arm.
    let reg = train_network(
        &net,
        &train,
        &base
            .with_strategy(LabelStrategy::Regularized)
            .with_lambda(lambda.lambda),
        Some(prob.params.clone()),
        Some(&prob.params),
    )?;
    let arms = [
        (DistillStrategy::Hard, hard),
        (DistillStrategy::Soft, soft),
        (DistillStrategy::Prob, prob),
        (DistillStrategy::Reg, reg),
    ]
    .into_iter()
    .map(|(strategy, training)| {
        Ok(DistillArm {
            strategy,
            report: evaluate(&training.params)?,
            training,
        })
    })
    .collect::<Result<Vec<_>>>()?;
    Ok(DistillResult {
        arms,
        lambda,
        teacher,
        teacher_report,
        train_size: split.train.len(),
        holdout_size: split.holdout.len(),
    })
}
