//! Core data types: class distributions, inputs, datasets and splitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Normalization tolerance accepted by [`ClassDistribution::new`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A probability vector over `K >= 2` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassDistribution(Vec<f64>);

impl ClassDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(ClassDistribution(probs))
    }

    /// Normalizes non-negative weights. Fails if all weights are zero.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// Index of the largest entry (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = k;
            }
        }
        best
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ClassDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ClassDistribution::new(v)
    }
}

impl From<ClassDistribution> for Vec<f64> {
    fn from(d: ClassDistribution) -> Self {
        d.0
    }
}

/// One-hot encoding of a class index.
pub fn one_hot(class_index: usize, k: usize) -> Result<ClassDistribution> {
    if class_index >= k {
        return Err(Error::arg(format!(
            "class index {class_index} out of range for K = {k}"
        )));
    }
    let mut v = vec![0.0; k];
    v[class_index] = 1.0;
    ClassDistribution::new(v)
}

/// Extracted feature representation of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("feature vector has non-finite entries"));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        FeatureVector::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Self {
        f.0
    }
}

/// Single-channel image with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    intensities: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, intensities: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::arg("image dimensions must be positive"));
        }
        if intensities.len() != height * width {
            return Err(Error::shape(format!(
                "{} intensities for a {height}x{width} image",
                intensities.len()
            )));
        }
        if intensities.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::arg("image intensities must lie in [0, 1]"));
        }
        Ok(ImageGrid {
            height,
            width,
            intensities,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.intensities[row * self.width + col]
    }
}

/// Shape of one network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputShape {
    Flat { dim: usize },
    Image { height: usize, width: usize },
}

impl InputShape {
    pub fn len(&self) -> usize {
        match *self {
            InputShape::Flat { dim } => dim,
            InputShape::Image { height, width } => height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Homogeneous instance inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Inputs {
    Features(Vec<FeatureVector>),
    Images(Vec<ImageGrid>),
}

impl Inputs {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Features(v) => v.len(),
            Inputs::Images(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn row(&self, i: usize) -> &[f64] {
        match self {
            Inputs::Features(v) => v[i].values(),
            Inputs::Images(v) => v[i].intensities(),
        }
    }

    fn select(&self, indices: &[usize]) -> Inputs {
        match self {
            Inputs::Features(v) => {
                Inputs::Features(indices.iter().map(|&i| v[i].clone()).collect())
            }
            Inputs::Images(v) => Inputs::Images(indices.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// Labelled instances with optional soft labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Inputs,
    hard_labels: Vec<usize>,
    soft_labels: Option<Vec<ClassDistribution>>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        inputs: Inputs,
        hard_labels: Vec<usize>,
        soft_labels: Option<Vec<ClassDistribution>>,
        num_classes: usize,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::arg("a dataset needs at least 2 classes"));
        }
        if inputs.len() != hard_labels.len() {
            return Err(Error::shape(format!(
                "{} inputs but {} labels",
                inputs.len(),
                hard_labels.len()
            )));
        }
        if let Some(&bad) = hard_labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::arg(format!(
                "label {bad} out of range for K = {num_classes}"
            )));
        }
        match &inputs {
            Inputs::Features(v) => {
                if let Some(first) = v.first() {
                    if v.iter().any(|f| f.dim() != first.dim()) {
                        return Err(Error::shape("feature vectors differ in dimension"));
                    }
                }
            }
            Inputs::Images(v) => {
                if let Some(first) = v.first() {
                    if v.iter()
                        .any(|g| g.height() != first.height() || g.width() != first.width())
                    {
                        return Err(Error::shape("images differ in size"));
                    }
                }
            }
        }
        if let Some(soft) = &soft_labels {
            if soft.len() != hard_labels.len() {
                return Err(Error::shape(format!(
                    "{} soft labels for {} instances",
                    soft.len(),
                    hard_labels.len()
                )));
            }
            if soft.iter().any(|s| s.num_classes() != num_classes) {
                return Err(Error::shape("soft label class count differs from K"));
            }
        }
        Ok(Dataset {
            inputs,
            hard_labels,
            soft_labels,
            num_classes,
        })
    }

    pub fn from_features(
        features: Vec<FeatureVector>,
        hard_labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        Self::new(Inputs::Features(features), hard_labels, None, num_classes)
    }

    pub fn len(&self) -> usize {
        self.hard_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hard_labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn inputs(&self) -> &Inputs {
        &self.inputs
    }

    pub fn hard_labels(&self) -> &[usize] {
        &self.hard_labels
    }

    pub fn soft_labels(&self) -> Option<&[ClassDistribution]> {
        self.soft_labels.as_deref()
    }

    /// Feature vectors, if this is a feature dataset.
    pub fn features(&self) -> Option<&[FeatureVector]> {
        match &self.inputs {
            Inputs::Features(v) => Some(v),
            Inputs::Images(_) => None,
        }
    }

    pub fn images(&self) -> Option<&[ImageGrid]> {
        match &self.inputs {
            Inputs::Images(v) => Some(v),
            Inputs::Features(_) => None,
        }
    }

    /// Shape of a single input; `None` for an empty dataset.
    pub fn input_shape(&self) -> Option<InputShape> {
        match &self.inputs {
            Inputs::Features(v) => v.first().map(|f| InputShape::Flat { dim: f.dim() }),
            Inputs::Images(v) => v.first().map(|g| InputShape::Image {
                height: g.height(),
                width: g.width(),
            }),
        }
    }

    /// Raw values of instance `i` (features, or row-major pixels).
    pub fn input_row(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.hard_labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn with_soft_labels(mut self, soft: Vec<ClassDistribution>) -> Result<Self> {
        let inputs = std::mem::replace(&mut self.inputs, Inputs::Features(Vec::new()));
        Dataset::new(inputs, self.hard_labels, Some(soft), self.num_classes)
    }

    pub fn without_soft_labels(mut self) -> Self {
        self.soft_labels = None;
        self
    }

    /// Instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select(indices),
            hard_labels: indices.iter().map(|&i| self.hard_labels[i]).collect(),
            soft_labels: self
                .soft_labels
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i].clone()).collect()),
            num_classes: self.num_classes,
        }
    }
}

/// Index partition produced by [`split_indices`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Partitions `0..labels.len()` into a training part of
/// `floor(train_fraction * n)` instances and a holdout remainder.
///
/// With `stratified`, each class contributes `floor` or `ceil` of its share,
/// the leftover seats going to the classes with the largest fractional
/// remainders (lowest class index on ties).
pub fn split_indices(
    labels: &[usize],
    num_classes: usize,
    train_fraction: f64,
    seed: Seed,
    stratified: bool,
) -> Result<Split> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::arg(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::DegenerateSplit(format!(
            "fraction {train_fraction} of {n} leaves an empty part"
        )));
    }
    let mut rng = seed.rng();

    let (mut train, mut holdout) = if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::arg(format!("label {y} out of range")));
            }
            by_class[y].push(i);
        }
        if let Some(k) = by_class.iter().position(|c| c.is_empty()) {
            return Err(Error::DegenerateSplit(format!(
                "class {k} has no instances"
            )));
        }
        let exact: Vec<f64> = by_class
            .iter()
            .map(|c| train_fraction * c.len() as f64)
            .collect();
        let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..num_classes).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut missing = n_train.saturating_sub(quota.iter().sum());
        for &k in order.iter().cycle() {
            if missing == 0 {
                break;
            }
            if quota[k] < by_class[k].len() {
                quota[k] += 1;
                missing -= 1;
            }
        }
        let mut train = Vec::with_capacity(n_train);
        let mut holdout = Vec::with_capacity(n - n_train);
        for (members, q) in by_class.iter_mut().zip(&quota) {
            rng.shuffle(members);
            train.extend_from_slice(&members[..*q]);
            holdout.extend_from_slice(&members[*q..]);
        }
        (train, holdout)
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut idx);
        let holdout = idx.split_off(n_train);
        (idx, holdout)
    };
    train.sort_unstable();
    holdout.sort_unstable();
    Ok(Split { train, holdout })
}

/// Splits a dataset into (train, holdout). See [`split_indices`].
pub fn split_dataset(
    data: &Dataset,
    train_fraction: f64,
    seed: Seed,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    let split = split_indices(
        data.hard_labels(),
        data.num_classes(),
        train_fraction,
        seed,
        stratified,
    )?;
    Ok((data.subset(&split.train), data.subset(&split.holdout)))
}

/// Stratified k-fold assignment. Returns the validation indices of each fold.
///
/// Instances of each class are shuffled and dealt round-robin; the dealing
/// position carries over between classes so fold sizes differ by at most one.
/// Fails if any fold would miss a class present in the data.
pub fn stratified_folds(
    labels: &[usize],
    num_classes: usize,
    folds: usize,
    seed: Seed,
) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if folds < 2 || folds > n {
        return Err(Error::arg(format!(
            "need 2 <= folds <= n, got folds = {folds}, n = {n}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for (k, members) in by_class.iter().enumerate() {
        if members.len() < folds {
            return Err(Error::DegenerateSplit(format!(
                "class {k} has {} instances, fewer than {folds} folds",
                members.len()
            )));
        }
    }
    let mut rng = seed.rng();
    let mut out = vec![Vec::new(); folds];
    let mut pos = 0;
    for members in by_class.iter_mut() {
        rng.shuffle(members);
        for &i in members.iter() {
            out[pos % folds].push(i);
            pos += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Per-coordinate affine standardization fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; coordinates with (near) zero spread keep unit scale.
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn fit_dataset(data: &Dataset) -> Result<Self> {
        let rows: Vec<&[f64]> = (0..data.len()).map(|i| data.input_row(i)).collect();
        Self::fit(&rows)
    }

    /// Centers each coordinate but divides all of them by one common scale,
    /// the root mean of the per-coordinate variances. Directions in feature
    /// space are preserved.
    pub fn fit_isotropic(rows: &[&[f64]]) -> Result<Self> {
        let per = Self::fit(rows)?;
        let n = rows.len() as f64;
        let d = per.mean.len();
        let mut total = 0.0;
        for r in rows {
            for (v, m) in r.iter().zip(&per.mean) {
                total += (v - m) * (v - m);
            }
        }
        let rms = (total / (n * d as f64)).sqrt();
        let scale = if rms > 1e-12 { rms } else { 1.0 };
        Ok(Standardizer {
            mean: per.mean,
            std: vec![scale; d],
        })
    }

    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Applies the transform to every feature vector of `data`.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let feats = data
            .features()
            .ok_or_else(|| Error::Unsupported("standardization of image inputs".into()))?;
        let out = feats
            .iter()
            .map(|f| FeatureVector::new(self.transform(f.values())))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(
            Inputs::Features(out),
            data.hard_labels().to_vec(),
            data.soft_labels().map(|s| s.to_vec()),
            data.num_classes(),
        )
    }
}
