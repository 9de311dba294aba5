//! Layered classifier with hand-written forward and reverse passes.
//!
//! Activations for a batch are stored sample-major in flat buffers. Spatial
//! tensors are laid out `[channel][row][col]` per sample. The parameter
//! vector holds, for every dense or convolutional layer in order, its
//! row-major weights followed by its biases.

use serde::{Deserialize, Serialize};

use crate::data::{ClassDistribution, InputShape};
use crate::error::{Error, Result};
use crate::prob_label::sigmoid;
use crate::rng::Seed;

const KERNEL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
}

/// One layer of a [`NetworkSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        units: usize,
    },
    /// 3x3 kernels, stride 1, zero "same" padding.
    Conv2d {
        filters: usize,
    },
    /// 2x2 window, stride 2; a trailing odd row or column is dropped.
    MaxPool,
    Activation {
        kind: Activation,
    },
    Flatten,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// `dense(1) -> sigmoid` over `dim` features: logistic regression.
    pub fn logistic(dim: usize) -> Self {
        NetworkSpec {
            input: InputShape::Flat { dim },
            layers: vec![
                LayerSpec::Dense { units: 1 },
                LayerSpec::Activation {
                    kind: Activation::Sigmoid,
                },
            ],
        }
    }

    /// conv(8)-relu-pool-conv(16)-relu-pool-flatten-dense(64)-relu-dense(1)-sigmoid.
    pub fn reduced_cnn(height: usize, width: usize) -> Self {
        let act = |kind| LayerSpec::Activation { kind };
        NetworkSpec {
            input: InputShape::Image { height, width },
            layers: vec![
                LayerSpec::Conv2d { filters: 8 },
                act(Activation::Relu),
                LayerSpec::MaxPool,
                LayerSpec::Conv2d { filters: 16 },
                act(Activation::Relu),
                LayerSpec::MaxPool,
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 64 },
                act(Activation::Relu),
                LayerSpec::Dense { units: 1 },
                act(Activation::Sigmoid),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Flat(usize),
    Spatial { c: usize, h: usize, w: usize },
}

impl Shape {
    fn len(self) -> usize {
        match self {
            Shape::Flat(n) => n,
            Shape::Spatial { c, h, w } => c * h * w,
        }
    }
}

/// Location of one layer's parameters inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBlock {
    pub layer: usize,
    pub kind: String,
    pub weight_shape: Vec<usize>,
    pub offset: usize,
    pub weights: usize,
    pub biases: usize,
}

impl ParamBlock {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.weights
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.weights;
        start..start + self.biases
    }
}

/// Flat parameter vector plus the layout that maps it onto layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub layout: Vec<ParamBlock>,
    pub values: Vec<f64>,
}

impl Parameters {
    pub fn new(layout: Vec<ParamBlock>, values: Vec<f64>) -> Result<Self> {
        let expected = layout.last().map_or(0, |b| b.offset + b.weights + b.biases);
        if values.len() != expected {
            return Err(Error::shape(format!(
                "{} values for a layout of {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("parameters must be finite"));
        }
        Ok(Parameters { layout, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_layout(&self, other: &Parameters) -> bool {
        self.layout == other.layout
    }

    /// Squared Euclidean distance `|self - other|^2`.
    pub fn squared_distance(&self, other: &Parameters) -> Result<f64> {
        if !self.same_layout(other) {
            return Err(Error::shape("parameter layouts differ"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Dense {
        n_in: usize,
        n_out: usize,
        block: usize,
    },
    Conv {
        c: usize,
        h: usize,
        w: usize,
        f: usize,
        block: usize,
    },
    Pool {
        c: usize,
        h: usize,
        w: usize,
    },
    Act(Activation),
    Flatten,
}

/// A validated [`NetworkSpec`] with resolved shapes and parameter layout.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    ops: Vec<Op>,
    shapes: Vec<Shape>,
    layout: Vec<ParamBlock>,
    num_classes: usize,
}

/// Loss and gradient of one batch.
#[derive(Debug, Clone)]
pub struct Gradient {
    /// Mean cross-entropy over the batch plus the anchor penalty, if any.
    pub loss: f64,
    pub values: Vec<f64>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let mut shape = match spec.input {
            InputShape::Flat { dim } => Shape::Flat(dim),
            InputShape::Image { height, width } => Shape::Spatial {
                c: 1,
                h: height,
                w: width,
            },
        };
        if shape.len() == 0 {
            return Err(Error::arg("network input is empty"));
        }
        let mut shapes = vec![shape];
        let mut ops = Vec::with_capacity(spec.layers.len());
        let mut layout: Vec<ParamBlock> = Vec::new();
        let mut offset = 0;
        for (i, layer) in spec.layers.iter().enumerate() {
            let (op, next) = match (*layer, shape) {
                (LayerSpec::Dense { units }, Shape::Flat(n_in)) if units > 0 => {
                    layout.push(ParamBlock {
                        layer: i,
                        kind: "dense".into(),
                        weight_shape: vec![units, n_in],
                        offset,
                        weights: units * n_in,
                        biases: units,
                    });
                    offset += units * n_in + units;
                    (
                        Op::Dense {
                            n_in,
                            n_out: units,
                            block: layout.len() - 1,
                        },
                        Shape::Flat(units),
                    )
                }
                (LayerSpec::Conv2d { filters }, Shape::Spatial { c, h, w }) if filters > 0 => {
                    let weights = filters * c * KERNEL * KERNEL;
                    layout.push(ParamBlock {
                        layer: i,
                        kind: "conv2d".into(),
                        weight_shape: vec![filters, c, KERNEL, KERNEL],
                        offset,
                        weights,
                        biases: filters,
                    });
                    offset += weights + filters;
                    (
                        Op::Conv {
                            c,
                            h,
                            w,
                            f: filters,
                            block: layout.len() - 1,
                        },
                        Shape::Spatial { c: filters, h, w },
                    )
                }
                (LayerSpec::MaxPool, Shape::Spatial { c, h, w }) if h >= 2 && w >= 2 => (
                    Op::Pool { c, h, w },
                    Shape::Spatial {
                        c,
                        h: h / 2,
                        w: w / 2,
                    },
                ),
                (
                    LayerSpec::Activation {
                        kind: Activation::Softmax,
                    },
                    Shape::Flat(n),
                ) => (Op::Act(Activation::Softmax), Shape::Flat(n)),
                (LayerSpec::Activation { kind }, s) if kind != Activation::Softmax => {
                    (Op::Act(kind), s)
                }
                (LayerSpec::Flatten, s) => (Op::Flatten, Shape::Flat(s.len())),
                (layer, s) => {
                    return Err(Error::shape(format!(
                        "layer {i} ({layer:?}) cannot follow shape {s:?}"
                    )))
                }
            };
            ops.push(op);
            shapes.push(next);
            shape = next;
        }
        let num_classes = match (ops.last(), shape) {
            (Some(Op::Act(Activation::Sigmoid)), Shape::Flat(1)) => 2,
            (Some(Op::Act(Activation::Softmax)), Shape::Flat(k)) if k >= 2 => k,
            _ => {
                return Err(Error::shape(
                    "network must end in sigmoid over 1 unit or softmax over K >= 2 units",
                ))
            }
        };
        Ok(Network {
            spec,
            ops,
            shapes,
            layout,
            num_classes,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_len(&self) -> usize {
        self.shapes[0].len()
    }

    pub fn num_params(&self) -> usize {
        self.layout
            .last()
            .map_or(0, |b| b.offset + b.weights + b.biases)
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    /// Glorot-uniform weights `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`,
    /// and zero biases, drawn in layout order.
    pub fn init_params(&self, seed: Seed) -> Parameters {
        let mut rng = seed.rng();
        let mut values = vec![0.0; self.num_params()];
        for b in &self.layout {
            let (fan_in, fan_out) = match b.weight_shape.as_slice() {
                [out, inp] => (*inp, *out),
                [f, c, kh, kw] => (c * kh * kw, f * kh * kw),
                _ => unreachable!("layout built by Network::new"),
            };
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut values[b.weight_range()] {
                *v = rng.uniform_range(-a, a);
            }
        }
        Parameters {
            layout: self.layout.clone(),
            values,
        }
    }

    /// All-zero parameters with this network's layout.
    pub fn zero_params(&self) -> Parameters {
        Parameters {
            layout: self.layout.clone(),
            values: vec![0.0; self.num_params()],
        }
    }

    fn check_params(&self, params: &Parameters) -> Result<()> {
        if params.layout != self.layout || params.values.len() != self.num_params() {
            return Err(Error::shape("parameter layout does not match the network"));
        }
        Ok(())
    }

    fn batch_size(&self, inputs: &[f64]) -> Result<usize> {
        let len = self.input_len();
        if inputs.is_empty() || inputs.len() % len != 0 {
            return Err(Error::shape(format!(
                "input buffer of {} values is not a positive multiple of {len}",
                inputs.len()
            )));
        }
        Ok(inputs.len() / len)
    }

    /// Class probabilities for a single input.
    pub fn forward(&self, params: &Parameters, input: &[f64]) -> Result<ClassDistribution> {
        if input.len() != self.input_len() {
            return Err(Error::shape(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_len()
            )));
        }
        let probs = self.predict_batch(params, input)?;
        ClassDistribution::new(probs)
    }

    /// Class probabilities for a batch, `batch x K` row-major.
    pub fn predict_batch(&self, params: &Parameters, inputs: &[f64]) -> Result<Vec<f64>> {
        self.check_params(params)?;
        let batch = self.batch_size(inputs)?;
        let trace = self.run_forward(params, inputs, batch);
        Ok(self.output_probs(trace.acts.last().expect("output"), batch))
    }

    fn output_probs(&self, out: &[f64], batch: usize) -> Vec<f64> {
        if self.shapes.last() == Some(&Shape::Flat(1)) {
            let mut probs = Vec::with_capacity(2 * batch);
            for &p in out {
                probs.push(1.0 - p);
                probs.push(p);
            }
            probs
        } else {
            out.to_vec()
        }
    }

    fn run_forward(&self, params: &Parameters, inputs: &[f64], batch: usize) -> Trace {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.ops.len() + 1);
        let mut pool_idx: Vec<Vec<usize>> = Vec::new();
        acts.push(inputs.to_vec());
        for (i, op) in self.ops.iter().enumerate() {
            let x = &acts[i];
            let mut y = vec![0.0; batch * self.shapes[i + 1].len()];
            match *op {
                Op::Dense { n_in, n_out, block } => {
                    let b = &self.layout[block];
                    dense_forward(
                        &params.values[b.weight_range()],
                        &params.values[b.bias_range()],
                        x,
                        batch,
                        n_in,
                        n_out,
                        &mut y,
                    );
                }
                Op::Conv { c, h, w, f, block } => {
                    let b = &self.layout[block];
                    conv_forward(
                        &params.values[b.weight_range()],
                        &params.values[b.bias_range()],
                        x,
                        batch,
                        (c, h, w, f),
                        &mut y,
                    );
                }
                Op::Pool { c, h, w } => {
                    let mut idx = vec![0usize; y.len()];
                    pool_forward(x, batch, (c, h, w), &mut y, &mut idx);
                    pool_idx.push(idx);
                }
                Op::Act(kind) => {
                    let n = self.shapes[i].len();
                    activation_forward(kind, x, n, &mut y);
                }
                Op::Flatten => y.copy_from_slice(x),
            }
            acts.push(y);
        }
        Trace { acts, pool_idx }
    }

    /// Mean cross-entropy of a batch against soft targets (`batch x K`),
    /// plus `lambda * |theta - anchor|^2` when an anchor is given, with its
    /// exact gradient.
    ///
    /// The output activation and the cross-entropy are differentiated
    /// jointly: `dL/dz = (p - t) / batch`. This matches the clamped loss
    /// wherever no predicted probability falls below the clamp.
    pub fn loss_and_gradient(
        &self,
        params: &Parameters,
        inputs: &[f64],
        targets: &[f64],
        anchor: Option<(&Parameters, f64)>,
    ) -> Result<Gradient> {
        self.check_params(params)?;
        let batch = self.batch_size(inputs)?;
        let k = self.num_classes;
        if targets.len() != batch * k {
            return Err(Error::shape(format!(
                "{} target values for a batch of {batch} with K = {k}",
                targets.len()
            )));
        }
        if let Some((a, lambda)) = anchor {
            self.check_params(a)?;
            if !(lambda >= 0.0) {
                return Err(Error::arg("lambda must be non-negative"));
            }
        }
        let trace = self.run_forward(params, inputs, batch);
        let out = trace.acts.last().expect("output");
        let probs = self.output_probs(out, batch);
        let mut loss = 0.0;
        for (p, t) in probs.chunks(k).zip(targets.chunks(k)) {
            loss += crate::trainers::loss::cross_entropy(p, t);
        }
        loss /= batch as f64;

        let inv = 1.0 / batch as f64;
        let mut g: Vec<f64> = if k == 2 && out.len() == batch {
            out.iter()
                .zip(targets.chunks(2))
                .map(|(p, t)| (p - t[1]) * inv)
                .collect()
        } else {
            probs
                .iter()
                .zip(targets)
                .map(|(p, t)| (p - t) * inv)
                .collect()
        };

        let mut grad = vec![0.0; self.num_params()];
        let last = self.ops.len() - 1;
        let mut pool_cursor = trace.pool_idx.len();
        for i in (0..last).rev() {
            let x = &trace.acts[i];
            let need_input_grad = i > 0;
            let mut gx = vec![0.0; if need_input_grad { x.len() } else { 0 }];
            match self.ops[i] {
                Op::Dense { n_in, n_out, block } => {
                    let b = &self.layout[block];
                    let (gw, gb) =
                        grad[b.offset..b.offset + b.weights + b.biases].split_at_mut(b.weights);
                    dense_backward(
                        &params.values[b.weight_range()],
                        x,
                        &g,
                        batch,
                        n_in,
                        n_out,
                        gw,
                        gb,
                        need_input_grad.then_some(gx.as_mut_slice()),
                    );
                }
                Op::Conv { c, h, w, f, block } => {
                    let b = &self.layout[block];
                    let (gw, gb) =
                        grad[b.offset..b.offset + b.weights + b.biases].split_at_mut(b.weights);
                    conv_backward(
                        &params.values[b.weight_range()],
                        x,
                        &g,
                        batch,
                        (c, h, w, f),
                        gw,
                        gb,
                        need_input_grad.then_some(gx.as_mut_slice()),
                    );
                }
                Op::Pool { .. } => {
                    pool_cursor -= 1;
                    if need_input_grad {
                        for (gi, &src) in g.iter().zip(&trace.pool_idx[pool_cursor]) {
                            gx[src] += gi;
                        }
                    }
                }
                Op::Act(kind) => {
                    if need_input_grad {
                        let n = self.shapes[i].len();
                        activation_backward(kind, x, &trace.acts[i + 1], &g, n, &mut gx);
                    }
                }
                Op::Flatten => {
                    if need_input_grad {
                        gx.copy_from_slice(&g);
                    }
                }
            }
            g = gx;
        }

        if let Some((a, lambda)) = anchor {
            if lambda > 0.0 {
                let mut sq = 0.0;
                for ((gv, p), q) in grad.iter_mut().zip(&params.values).zip(&a.values) {
                    let d = p - q;
                    sq += d * d;
                    *gv += 2.0 * lambda * d;
                }
                loss += lambda * sq;
            }
        }
        Ok(Gradient { loss, values: grad })
    }
}

struct Trace {
    acts: Vec<Vec<f64>>,
    pool_idx: Vec<Vec<usize>>,
}

/// Four independent accumulators so the loop vectorizes; the summation order
/// is fixed, so results stay deterministic.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

fn dense_forward(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    batch: usize,
    n_in: usize,
    n_out: usize,
    y: &mut [f64],
) {
    for s in 0..batch {
        let xs = &x[s * n_in..(s + 1) * n_in];
        let ys = &mut y[s * n_out..(s + 1) * n_out];
        for (u, yu) in ys.iter_mut().enumerate() {
            *yu = b[u] + dot(&w[u * n_in..(u + 1) * n_in], xs);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dense_backward(
    w: &[f64],
    x: &[f64],
    gy: &[f64],
    batch: usize,
    n_in: usize,
    n_out: usize,
    gw: &mut [f64],
    gb: &mut [f64],
    mut gx: Option<&mut [f64]>,
) {
    for s in 0..batch {
        let xs = &x[s * n_in..(s + 1) * n_in];
        for u in 0..n_out {
            let g = gy[s * n_out + u];
            if g == 0.0 {
                continue;
            }
            gb[u] += g;
            axpy(&mut gw[u * n_in..(u + 1) * n_in], g, xs);
            if let Some(gx) = gx.as_deref_mut() {
                axpy(
                    &mut gx[s * n_in..(s + 1) * n_in],
                    g,
                    &w[u * n_in..(u + 1) * n_in],
                );
            }
        }
    }
}

/// Valid output range along one axis for kernel offset `delta`.
#[inline]
fn valid_range(len: usize, delta: isize) -> (usize, usize) {
    let lo = (-delta).max(0) as usize;
    let hi = (len as isize - delta.max(0)).max(0) as usize;
    (lo, hi.max(lo))
}

fn conv_forward(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    batch: usize,
    (c, h, wd, f): (usize, usize, usize, usize),
    y: &mut [f64],
) {
    let hw = h * wd;
    for s in 0..batch {
        for fi in 0..f {
            let out = &mut y[(s * f + fi) * hw..(s * f + fi + 1) * hw];
            out.fill(b[fi]);
            for ci in 0..c {
                let inp = &x[(s * c + ci) * hw..(s * c + ci + 1) * hw];
                for ky in 0..KERNEL {
                    let dy = ky as isize - 1;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..KERNEL {
                        let dx = kx as isize - 1;
                        let (x0, x1) = valid_range(wd, dx);
                        let wv = w[((fi * c + ci) * KERNEL + ky) * KERNEL + kx];
                        for row in y0..y1 {
                            let src_row = (row as isize + dy) as usize * wd;
                            let src = &inp[(src_row as isize + x0 as isize + dx) as usize..];
                            axpy(&mut out[row * wd + x0..row * wd + x1], wv, &src[..x1 - x0]);
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    w: &[f64],
    x: &[f64],
    gy: &[f64],
    batch: usize,
    (c, h, wd, f): (usize, usize, usize, usize),
    gw: &mut [f64],
    gb: &mut [f64],
    mut gx: Option<&mut [f64]>,
) {
    let hw = h * wd;
    for s in 0..batch {
        for fi in 0..f {
            let go = &gy[(s * f + fi) * hw..(s * f + fi + 1) * hw];
            gb[fi] += go.iter().sum::<f64>();
            for ci in 0..c {
                let inp = &x[(s * c + ci) * hw..(s * c + ci + 1) * hw];
                for ky in 0..KERNEL {
                    let dy = ky as isize - 1;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..KERNEL {
                        let dx = kx as isize - 1;
                        let (x0, x1) = valid_range(wd, dx);
                        let wi = ((fi * c + ci) * KERNEL + ky) * KERNEL + kx;
                        let wv = w[wi];
                        let mut acc = 0.0;
                        for row in y0..y1 {
                            let src_start =
                                ((row as isize + dy) as usize * wd) as isize + x0 as isize + dx;
                            let src_start = src_start as usize;
                            let g_row = &go[row * wd + x0..row * wd + x1];
                            acc += dot(g_row, &inp[src_start..src_start + (x1 - x0)]);
                            if let Some(gx) = gx.as_deref_mut() {
                                let base = (s * c + ci) * hw + src_start;
                                axpy(&mut gx[base..base + (x1 - x0)], wv, g_row);
                            }
                        }
                        gw[wi] += acc;
                    }
                }
            }
        }
    }
}

fn pool_forward(
    x: &[f64],
    batch: usize,
    (c, h, w): (usize, usize, usize),
    y: &mut [f64],
    idx: &mut [usize],
) {
    let (h2, w2) = (h / 2, w / 2);
    for s in 0..batch {
        for ci in 0..c {
            let base_in = (s * c + ci) * h * w;
            let base_out = (s * c + ci) * h2 * w2;
            for oy in 0..h2 {
                for ox in 0..w2 {
                    let mut best = base_in + (2 * oy) * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let cand = base_in + (2 * oy + dy) * w + 2 * ox + dx;
                        if x[cand] > x[best] {
                            best = cand;
                        }
                    }
                    y[base_out + oy * w2 + ox] = x[best];
                    idx[base_out + oy * w2 + ox] = best;
                }
            }
        }
    }
}

fn activation_forward(kind: Activation, x: &[f64], n: usize, y: &mut [f64]) {
    match kind {
        Activation::Relu => {
            for (o, &v) in y.iter_mut().zip(x) {
                *o = v.max(0.0);
            }
        }
        Activation::Sigmoid => {
            for (o, &v) in y.iter_mut().zip(x) {
                *o = sigmoid(v);
            }
        }
        Activation::Softmax => {
            for (xs, ys) in x.chunks(n).zip(y.chunks_mut(n)) {
                let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for (o, &v) in ys.iter_mut().zip(xs) {
                    *o = (v - m).exp();
                    total += *o;
                }
                ys.iter_mut().for_each(|o| *o /= total);
            }
        }
    }
}

fn activation_backward(
    kind: Activation,
    x: &[f64],
    y: &[f64],
    gy: &[f64],
    n: usize,
    gx: &mut [f64],
) {
    match kind {
        Activation::Relu => {
            for ((o, &v), &g) in gx.iter_mut().zip(x).zip(gy) {
                *o = if v > 0.0 { g } else { 0.0 };
            }
        }
        Activation::Sigmoid => {
            for ((o, &p), &g) in gx.iter_mut().zip(y).zip(gy) {
                *o = g * p * (1.0 - p);
            }
        }
        Activation::Softmax => {
            for ((ys, gs), os) in y.chunks(n).zip(gy.chunks(n)).zip(gx.chunks_mut(n)) {
                let inner = dot(ys, gs);
                for ((o, &p), &g) in os.iter_mut().zip(ys).zip(gs) {
                    *o = p * (g - inner);
                }
            }
        }
    }
}
