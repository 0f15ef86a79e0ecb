//! Convolutional torque regressor with hand-written backpropagation.
//!
//! Architecture: conv(8, 5×5, stride 2) → ReLU → conv(16, 5×5, stride 2)
//! → ReLU → dense(64) → ReLU → dense(2). Valid padding throughout. All
//! parameters live in one flat vector so the optimizer, the gradient check
//! and the serializer share a single layout.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::Sample;
use crate::imaging::ChannelImage;

const MAGIC: &[u8; 4] = b"CFTR";
const VERSION: u32 = 1;
const MAX_DIM: u32 = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training set is empty")]
    Empty,
    #[error("sample {index} is {got:?}, model expects {want:?}")]
    ShapeMismatch { index: usize, got: (usize, usize, usize), want: (usize, usize, usize) },
    #[error("loss became non-finite in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("not a model file (bad magic)")]
    Magic,
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("model file truncated")]
    Truncated,
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Layer sizes. The input is `channels × height × width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub conv1: usize,
    pub conv2: usize,
    pub kernel: usize,
    pub stride: usize,
    pub hidden: usize,
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    w4: usize,
    b4: usize,
    end: usize,
}

impl RegressorShape {
    /// Default layer sizes for the given input.
    pub fn for_input(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, conv1: 8, conv2: 16, kernel: 5, stride: 2, hidden: 64 }
    }

    fn out_dim(n: usize, k: usize, s: usize) -> Option<usize> {
        (n >= k && s > 0).then(|| (n - k) / s + 1)
    }

    pub fn conv1_out(&self) -> Option<(usize, usize)> {
        Some((
            Self::out_dim(self.height, self.kernel, self.stride)?,
            Self::out_dim(self.width, self.kernel, self.stride)?,
        ))
    }

    pub fn conv2_out(&self) -> Option<(usize, usize)> {
        let (h, w) = self.conv1_out()?;
        Some((Self::out_dim(h, self.kernel, self.stride)?, Self::out_dim(w, self.kernel, self.stride)?))
    }

    pub fn validate(&self) -> Result<(), String> {
        let dims =
            [self.channels, self.height, self.width, self.conv1, self.conv2, self.kernel, self.stride, self.hidden];
        if dims.iter().any(|&d| d == 0 || d > MAX_DIM as usize) {
            return Err(format!("layer sizes must be in 1..={MAX_DIM}"));
        }
        if self.conv2_out().is_none() {
            return Err(format!(
                "input {}x{} too small for two {}x{} convolutions",
                self.height, self.width, self.kernel, self.kernel
            ));
        }
        if self.param_count() > 50_000_000 {
            return Err("parameter count too large".into());
        }
        Ok(())
    }

    fn flat(&self) -> usize {
        let (h, w) = self.conv2_out().expect("validated shape");
        self.conv2 * h * w
    }

    fn offsets(&self) -> Offsets {
        let k2 = self.kernel * self.kernel;
        let w1 = 0;
        let b1 = w1 + self.conv1 * self.channels * k2;
        let w2 = b1 + self.conv1;
        let b2 = w2 + self.conv2 * self.conv1 * k2;
        let w3 = b2 + self.conv2;
        let b3 = w3 + self.hidden * self.flat();
        let w4 = b3 + self.hidden;
        let b4 = w4 + 2 * self.hidden;
        Offsets { w1, b1, w2, b2, w3, b3, w4, b4, end: b4 + 2 }
    }

    pub fn param_count(&self) -> usize {
        self.offsets().end
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorqueRegressor {
    shape: RegressorShape,
    params: Vec<f64>,
    /// (bending, twisting) training-target mean and std, N·mm.
    target_mean: [f64; 2],
    target_std: [f64; 2],
}

struct Cache {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    z3: Vec<f64>,
    a3: Vec<f64>,
    out: [f64; 2],
}

impl TorqueRegressor {
    /// He-normal weights, zero biases, identity standardization.
    pub fn initialized(shape: RegressorShape, seed: u64) -> Result<Self, TrainError> {
        shape.validate().map_err(TrainError::Config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = shape.offsets();
        let k2 = shape.kernel * shape.kernel;
        let mut params = vec![0.0; o.end];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, gain: f64| {
            let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
            for p in &mut params[range] {
                *p = normal.sample(&mut rng);
            }
        };
        fill(o.w1..o.b1, shape.channels * k2, 2.0);
        fill(o.w2..o.b2, shape.conv1 * k2, 2.0);
        fill(o.w3..o.b3, shape.flat(), 2.0);
        fill(o.w4..o.b4, shape.hidden, 1.0);
        Ok(Self { shape, params, target_mean: [0.0; 2], target_std: [1.0; 2] })
    }

    pub fn shape(&self) -> RegressorShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len(), "parameter count");
        self.params = params;
    }

    pub fn target_mean(&self) -> [f64; 2] {
        self.target_mean
    }

    pub fn target_std(&self) -> [f64; 2] {
        self.target_std
    }

    pub fn set_standardization(&mut self, mean: [f64; 2], std: [f64; 2]) {
        self.target_mean = mean;
        self.target_std = std;
    }

    fn forward(&self, x: &[f64]) -> Cache {
        let s = &self.shape;
        let o = s.offsets();
        let p = &self.params;
        let (h1, w1) = s.conv1_out().expect("validated shape");
        let (h2, w2) = s.conv2_out().expect("validated shape");
        let z1 = conv_forward(
            x,
            s.channels,
            s.height,
            s.width,
            &p[o.w1..o.b1],
            &p[o.b1..o.w2],
            s.conv1,
            s.kernel,
            s.stride,
            h1,
            w1,
        );
        let a1 = relu(&z1);
        let z2 =
            conv_forward(&a1, s.conv1, h1, w1, &p[o.w2..o.b2], &p[o.b2..o.w3], s.conv2, s.kernel, s.stride, h2, w2);
        let a2 = relu(&z2);
        let z3 = dense_forward(&a2, &p[o.w3..o.b3], &p[o.b3..o.w4], s.hidden);
        let a3 = relu(&z3);
        let y = dense_forward(&a3, &p[o.w4..o.b4], &p[o.b4..o.end], 2);
        Cache { z1, a1, z2, a2, z3, a3, out: [y[0], y[1]] }
    }

    /// Network output in standardized target units.
    pub fn predict_standardized(&self, x: &[f64]) -> [f64; 2] {
        assert_eq!(x.len(), self.shape.input_len(), "input size");
        self.forward(x).out
    }

    /// (bending, twisting) in N·mm.
    pub fn predict(&self, image: &ChannelImage) -> [f64; 2] {
        let y = self.predict_standardized(&image.data);
        [y[0] * self.target_std[0] + self.target_mean[0], y[1] * self.target_std[1] + self.target_mean[1]]
    }

    /// Mean squared error over the batch and both outputs (standardized
    /// units), and its gradient with respect to every parameter.
    pub fn loss_gradient(&self, inputs: &[&[f64]], targets: &[[f64; 2]]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(inputs, targets, &mut grad);
        (loss, grad)
    }

    fn accumulate_gradient(&self, inputs: &[&[f64]], targets: &[[f64; 2]], grad: &mut [f64]) -> f64 {
        assert_eq!(inputs.len(), targets.len());
        let s = &self.shape;
        let o = s.offsets();
        let p = &self.params;
        let (h1, w1) = s.conv1_out().expect("validated shape");
        let (h2, w2) = s.conv2_out().expect("validated shape");
        let n = inputs.len() as f64;
        let mut loss = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            let c = self.forward(x);
            let e = [c.out[0] - t[0], c.out[1] - t[1]];
            loss += (e[0] * e[0] + e[1] * e[1]) / (2.0 * n);
            // d(loss)/d(out) for the mean over 2n squared errors.
            let dy = [e[0] / n, e[1] / n];

            let mut da3 = vec![0.0; s.hidden];
            dense_backward(&c.a3, &dy, &p[o.w4..o.b4], grad, o.w4, o.b4, Some(&mut da3));
            let dz3 = relu_backward(&c.z3, &da3);
            let mut da2 = vec![0.0; c.a2.len()];
            dense_backward(&c.a2, &dz3, &p[o.w3..o.b3], grad, o.w3, o.b3, Some(&mut da2));
            let dz2 = relu_backward(&c.z2, &da2);
            let mut da1 = vec![0.0; c.a1.len()];
            conv_backward(
                &c.a1,
                s.conv1,
                h1,
                w1,
                &dz2,
                s.conv2,
                h2,
                w2,
                s.kernel,
                s.stride,
                &p[o.w2..o.b2],
                grad,
                o.w2,
                o.b2,
                Some(&mut da1),
            );
            let dz1 = relu_backward(&c.z1, &da1);
            conv_backward(
                x,
                s.channels,
                s.height,
                s.width,
                &dz1,
                s.conv1,
                h1,
                w1,
                s.kernel,
                s.stride,
                &p[o.w1..o.b1],
                grad,
                o.w1,
                o.b1,
                None,
            );
        }
        loss
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.shape;
        let mut out = Vec::with_capacity(64 + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in [s.channels, s.height, s.width, s.conv1, s.conv2, s.kernel, s.stride, s.hidden] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for v in self.target_mean.iter().chain(&self.target_std).chain(&self.params) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(ModelError::Magic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(ModelError::Version(version));
        }
        let mut dims = [0usize; 8];
        for d in &mut dims {
            let v = r.u32()?;
            if v == 0 || v > MAX_DIM {
                return Err(ModelError::Invalid(format!("layer size {v} outside 1..={MAX_DIM}")));
            }
            *d = v as usize;
        }
        let [channels, height, width, conv1, conv2, kernel, stride, hidden] = dims;
        let shape = RegressorShape { channels, height, width, conv1, conv2, kernel, stride, hidden };
        shape.validate().map_err(ModelError::Invalid)?;
        let count = r.u64()?;
        if count != shape.param_count() as u64 {
            return Err(ModelError::Invalid(format!("{count} parameters, shape needs {}", shape.param_count())));
        }
        if r.remaining() != 8 * (4 + shape.param_count()) {
            return Err(if r.remaining() < 8 * (4 + shape.param_count()) {
                ModelError::Truncated
            } else {
                ModelError::Invalid("trailing bytes".into())
            });
        }
        let mean = [r.f64()?, r.f64()?];
        let std = [r.f64()?, r.f64()?];
        let params = (0..shape.param_count()).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        if !mean.iter().chain(&params).all(|v| v.is_finite()) || !std.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(ModelError::Invalid("non-finite parameter or non-positive std".into()));
        }
        Ok(Self { shape, params, target_mean: mean, target_std: std })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(ModelError::Truncated)?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

fn relu_backward(z: &[f64], da: &[f64]) -> Vec<f64> {
    z.iter().zip(da).map(|(&z, &d)| if z > 0.0 { d } else { 0.0 }).collect()
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(
    x: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    bias: &[f64],
    cout: usize,
    k: usize,
    s: usize,
    ho: usize,
    wo: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; cout * ho * wo];
    for o in 0..cout {
        let plane = &mut out[o * ho * wo..(o + 1) * ho * wo];
        plane.iter_mut().for_each(|v| *v = bias[o]);
        for c in 0..cin {
            let xin = &x[c * h * w..(c + 1) * h * w];
            let wk = &weights[(o * cin + c) * k * k..(o * cin + c + 1) * k * k];
            for i in 0..ho {
                for j in 0..wo {
                    let mut acc = 0.0;
                    for ki in 0..k {
                        let row = &xin[(i * s + ki) * w + j * s..(i * s + ki) * w + j * s + k];
                        let wrow = &wk[ki * k..(ki + 1) * k];
                        for (a, b) in row.iter().zip(wrow) {
                            acc += a * b;
                        }
                    }
                    plane[i * wo + j] += acc;
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    dz: &[f64],
    cout: usize,
    ho: usize,
    wo: usize,
    k: usize,
    s: usize,
    weights: &[f64],
    grad: &mut [f64],
    w_off: usize,
    b_off: usize,
    mut dx: Option<&mut Vec<f64>>,
) {
    for o in 0..cout {
        let dplane = &dz[o * ho * wo..(o + 1) * ho * wo];
        grad[b_off + o] += dplane.iter().sum::<f64>();
        for c in 0..cin {
            let xin = &x[c * h * w..(c + 1) * h * w];
            let base = (o * cin + c) * k * k;
            for i in 0..ho {
                for j in 0..wo {
                    let g = dplane[i * wo + j];
                    if g == 0.0 {
                        continue;
                    }
                    for ki in 0..k {
                        let r0 = (i * s + ki) * w + j * s;
                        for kj in 0..k {
                            grad[w_off + base + ki * k + kj] += g * xin[r0 + kj];
                        }
                        if let Some(dx) = dx.as_deref_mut() {
                            let d = &mut dx[c * h * w + r0..c * h * w + r0 + k];
                            for (kj, dv) in d.iter_mut().enumerate() {
                                *dv += g * weights[base + ki * k + kj];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn dense_forward(a: &[f64], weights: &[f64], bias: &[f64], out: usize) -> Vec<f64> {
    let n = a.len();
    (0..out).map(|j| bias[j] + weights[j * n..(j + 1) * n].iter().zip(a).map(|(w, x)| w * x).sum::<f64>()).collect()
}

fn dense_backward(
    a: &[f64],
    dz: &[f64],
    weights: &[f64],
    grad: &mut [f64],
    w_off: usize,
    b_off: usize,
    da: Option<&mut Vec<f64>>,
) {
    let n = a.len();
    for (j, &g) in dz.iter().enumerate() {
        grad[b_off + j] += g;
        if g == 0.0 {
            continue;
        }
        for (i, &x) in a.iter().enumerate() {
            grad[w_off + j * n + i] += g * x;
        }
    }
    if let Some(da) = da {
        for (j, &g) in dz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (i, d) in da.iter_mut().enumerate() {
                *d += g * weights[j * n + i];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 32, learning_rate: 1e-3, momentum: 0.9, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: TorqueRegressor,
    /// Mean standardized squared error per epoch, measured during the epoch.
    pub loss_history: Vec<f64>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

/// Mini-batch SGD with momentum on standardized targets.
pub fn train_regressor(samples: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let first = samples.first().ok_or(TrainError::Empty)?;
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(TrainError::Config("batch_size > 0, learning_rate > 0 and momentum in [0, 1) required".into()));
    }
    let want = (first.image.channels, first.image.height, first.image.width);
    for (index, s) in samples.iter().enumerate() {
        let got = (s.image.channels, s.image.height, s.image.width);
        if got != want {
            return Err(TrainError::ShapeMismatch { index, got, want });
        }
    }
    let shape = RegressorShape::for_input(want.0, want.1, want.2);
    let mut model = TorqueRegressor::initialized(shape, cfg.seed)?;
    let (mb, sb) = mean_std(samples.iter().map(|s| s.bending));
    let (mt, st) = mean_std(samples.iter().map(|s| s.twisting));
    model.set_standardization([mb, mt], [sb, st]);
    let targets: Vec<[f64; 2]> = samples.iter().map(|s| [(s.bending - mb) / sb, (s.twisting - mt) / st]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut velocity = vec![0.0; model.params.len()];
    let mut grad = vec![0.0; model.params.len()];
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| samples[i].image.data.as_slice()).collect();
            let tgts: Vec<[f64; 2]> = batch.iter().map(|&i| targets[i]).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = model.accumulate_gradient(&inputs, &tgts, &mut grad);
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            for ((p, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *p += *v;
            }
        }
        let mse = epoch_loss / samples.len() as f64;
        if !mse.is_finite() || !model.params.iter().all(|p| p.is_finite()) {
            return Err(TrainError::NonFinite { epoch });
        }
        history.push(mse);
    }
    Ok(TrainOutcome { model, loss_history: history })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub index: usize,
    pub bending_true: f64,
    pub twisting_true: f64,
    pub bending_pred: f64,
    pub twisting_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rmse_bending: f64,
    pub rmse_twisting: f64,
    pub predictions: Vec<Prediction>,
}

impl Evaluation {
    /// Compute RMSEs from existing predictions.
    pub fn from_predictions(predictions: Vec<Prediction>) -> Self {
        let n = predictions.len().max(1) as f64;
        let rmse = |f: &dyn Fn(&Prediction) -> f64| (predictions.iter().map(|p| f(p).powi(2)).sum::<f64>() / n).sqrt();
        Self {
            rmse_bending: rmse(&|p| p.bending_pred - p.bending_true),
            rmse_twisting: rmse(&|p| p.twisting_pred - p.twisting_true),
            predictions,
        }
    }

    /// Tab-separated per-sample predictions with a header line.
    pub fn predictions_tsv(&self) -> String {
        let mut out = String::from("index\tbending_true_Nmm\tbending_pred_Nmm\ttwisting_true_Nmm\ttwisting_pred_Nmm\n");
        for p in &self.predictions {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                p.index, p.bending_true, p.bending_pred, p.twisting_true, p.twisting_pred
            ));
        }
        out
    }
}

/// RMSE in N·mm over `samples`, plus every prediction.
pub fn evaluate_regressor(model: &TorqueRegressor, samples: &[Sample]) -> Evaluation {
    let predictions = samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let [b, t] = model.predict(&s.image);
            Prediction { index, bending_true: s.bending, twisting_true: s.twisting, bending_pred: b, twisting_pred: t }
        })
        .collect();
    Evaluation::from_predictions(predictions)
}
