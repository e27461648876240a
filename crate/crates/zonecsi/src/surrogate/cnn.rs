//! Convolutional existence classifier.
//!
//! The 15-feature row enters as a 1x15x1 frame. Each conv block normalizes
//! its input channels over the batch, zero-pads the frame to 17x3, and
//! applies 3x3 filters; with the data confined to the middle row, each
//! filter effectively reads a 3-wide feature window, so the block reduces to
//! a width-3 one-dimensional convolution followed by ReLU. A width-2,
//! stride-1 max pool (15 -> 14), inverted dropout, and a fully connected
//! softmax pair finish the stack. Training minimizes a focal objective with
//! RMSProp on mean batch loss; all weights live in one flat parameter vector
//! so analytic gradients can be checked against finite differences.

use crate::error::{Error, Result};
use crate::seed::rng_for;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

const WIDTH: usize = 15;
const POOLED: usize = WIDTH - 1;
const BN_EPS: f64 = 1e-5;
const P_CLAMP: f64 = 1e-12;

/// Which focal objective the trainer minimizes.
///
/// `TrueClass` is the standard single-term focal loss of the labeled class
/// and is the default: it is the only variant whose per-sample optimum
/// depends on the label, so it is the one that can actually fit data.
/// `AsWritten` sums the focal term over both output probabilities exactly as
/// the objective formula reads; it is label-independent and kept for
/// comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FocalVariant {
    #[default]
    TrueClass,
    AsWritten,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSpec {
    pub conv_layers: usize,
    pub filters_per_layer: usize,
    pub dropout: f64,
    /// Focal modulating exponent.
    pub gamma: f64,
    /// Existent-class weight; the other class gets 1 - alpha1.
    pub alpha1: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub focal_variant: FocalVariant,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            conv_layers: 2,
            filters_per_layer: 30,
            dropout: 0.5,
            gamma: 2.0,
            alpha1: 0.32,
            learning_rate: 1e-3,
            batch_size: 4096,
            epochs: 400,
            rng_seed: 0,
            focal_variant: FocalVariant::TrueClass,
        }
    }
}

impl ClassifierSpec {
    pub fn validate(&self) -> Result<()> {
        if self.conv_layers == 0 || self.filters_per_layer == 0 {
            return Err(Error::InvalidConfig(
                "classifier needs at least one conv layer and filter".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout must be in [0,1), got {}",
                self.dropout
            )));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidConfig("gamma must be >= 0".into()));
        }
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha1 must be in (0,1), got {}",
                self.alpha1
            )));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig(
                "learning rate, batch size, and epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Parameter offsets of one conv block in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ConvLayout {
    c_in: usize,
    filters: usize,
    bn_gamma: usize,
    bn_beta: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub spec: ClassifierSpec,
    layers: Vec<ConvLayout>,
    fc_w: usize,
    fc_b: usize,
    n_params: usize,
    params: Vec<f64>,
    /// Per layer, per input channel: batch statistics smoothed at momentum
    /// 0.9 during training, used verbatim at inference.
    running_mean: Vec<Vec<f64>>,
    running_var: Vec<Vec<f64>>,
    pub epoch_loss: Vec<f64>,
}

fn layout(spec: &ClassifierSpec) -> (Vec<ConvLayout>, usize, usize, usize) {
    let mut layers = Vec::new();
    let mut off = 0;
    let mut c_in = 1;
    for _ in 0..spec.conv_layers {
        let filters = spec.filters_per_layer;
        let l = ConvLayout {
            c_in,
            filters,
            bn_gamma: off,
            bn_beta: off + c_in,
            w: off + 2 * c_in,
            b: off + 2 * c_in + filters * c_in * 3,
        };
        off = l.b + filters;
        layers.push(l);
        c_in = filters;
    }
    let fc_in = c_in * POOLED;
    let fc_w = off;
    let fc_b = fc_w + 2 * fc_in;
    (layers, fc_w, fc_b, fc_b + 2)
}

impl ClassifierModel {
    fn new(spec: ClassifierSpec) -> Self {
        let (layers, fc_w, fc_b, n_params) = layout(&spec);
        let mut params = vec![0.0; n_params];
        let mut rng = rng_for(spec.rng_seed, "classifier-init");
        for l in &layers {
            for g in 0..l.c_in {
                params[l.bn_gamma + g] = 1.0;
            }
            let bound = 1.0 / ((l.c_in * 3) as f64).sqrt();
            for w in 0..l.filters * l.c_in * 3 {
                params[l.w + w] = rng.gen_range(-bound..bound);
            }
        }
        let fc_in = layers.last().unwrap().filters * POOLED;
        let bound = 1.0 / (fc_in as f64).sqrt();
        for w in 0..2 * fc_in {
            params[fc_w + w] = rng.gen_range(-bound..bound);
        }
        let running_mean = layers.iter().map(|l| vec![0.0; l.c_in]).collect();
        let running_var = layers.iter().map(|l| vec![1.0; l.c_in]).collect();
        ClassifierModel {
            spec,
            layers,
            fc_w,
            fc_b,
            n_params,
            params,
            running_mean,
            running_var,
            epoch_loss: Vec::new(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn param(&self, i: usize) -> f64 {
        self.params[i]
    }

    pub fn nudge_param(&mut self, i: usize, delta: f64) {
        self.params[i] += delta;
    }

    /// Inference forward pass: running batch-norm statistics, no dropout.
    pub fn predict_proba(&self, features: &[f64; 15]) -> [f64; 2] {
        let mut x: Vec<f64> = features.to_vec(); // [c][w], c_in = 1
        for (li, l) in self.layers.iter().enumerate() {
            let mut normed = vec![0.0; l.c_in * WIDTH];
            for c in 0..l.c_in {
                let inv = 1.0 / (self.running_var[li][c] + BN_EPS).sqrt();
                let g = self.params[l.bn_gamma + c];
                let b = self.params[l.bn_beta + c];
                for w in 0..WIDTH {
                    normed[c * WIDTH + w] =
                        g * (x[c * WIDTH + w] - self.running_mean[li][c]) * inv + b;
                }
            }
            x = self.conv_forward(l, &normed, 1);
            for v in x.iter_mut() {
                *v = v.max(0.0);
            }
        }
        let c_out = self.layers.last().unwrap().filters;
        let mut flat = vec![0.0; c_out * POOLED];
        for c in 0..c_out {
            for w in 0..POOLED {
                flat[c * POOLED + w] = x[c * WIDTH + w].max(x[c * WIDTH + w + 1]);
            }
        }
        let fc_in = c_out * POOLED;
        let mut logits = [0.0f64; 2];
        for (k, logit) in logits.iter_mut().enumerate() {
            let mut acc = self.params[self.fc_b + k];
            for (j, f) in flat.iter().enumerate() {
                acc += self.params[self.fc_w + k * fc_in + j] * f;
            }
            *logit = acc;
        }
        softmax(logits)
    }

    /// Existence decision: class 1 iff it is strictly the more probable.
    pub fn predict(&self, features: &[f64; 15]) -> bool {
        let p = self.predict_proba(features);
        p[1] > p[0]
    }

    /// Width-preserving convolution of a batch stored as [n][c][w].
    fn conv_forward(&self, l: &ConvLayout, x: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * l.filters * WIDTH];
        for s in 0..n {
            let xin = &x[s * l.c_in * WIDTH..(s + 1) * l.c_in * WIDTH];
            for f in 0..l.filters {
                let base = l.w + f * l.c_in * 3;
                for w in 0..WIDTH {
                    let mut acc = self.params[l.b + f];
                    for c in 0..l.c_in {
                        for k in 0..3usize {
                            let src = w + k;
                            if src >= 1 && src <= WIDTH {
                                acc += self.params[base + c * 3 + k] * xin[c * WIDTH + src - 1];
                            }
                        }
                    }
                    out[(s * l.filters + f) * WIDTH + w] = acc;
                }
            }
        }
        out
    }
}

fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let sum = e[0] + e[1];
    [e[0] / sum, e[1] / sum]
}

/// Per-sample focal loss and its gradient with respect to the two logits.
fn focal_and_dlogits(
    p: [f64; 2],
    label: usize,
    gamma: f64,
    alpha1: f64,
    variant: FocalVariant,
) -> (f64, [f64; 2]) {
    let alpha = [1.0 - alpha1, alpha1];
    let terms: &[usize] = match variant {
        FocalVariant::TrueClass => &[label][..],
        FocalVariant::AsWritten => &[0, 1][..],
    };
    let mut loss = 0.0;
    let mut dp = [0.0f64; 2];
    for &v in terms {
        let pv = p[v].max(P_CLAMP);
        loss += (1.0 - pv).powf(gamma) * alpha[v] * (-pv.ln());
        let dmod = if gamma == 0.0 {
            0.0
        } else {
            -gamma * (1.0 - pv).powf(gamma - 1.0) * (-pv.ln())
        };
        dp[v] += alpha[v] * (dmod - (1.0 - pv).powf(gamma) / pv);
    }
    // Through softmax: dL/dz_k = sum_v dL/dp_v * p_v (delta_vk - p_k).
    let mut dz = [0.0f64; 2];
    for k in 0..2 {
        for v in 0..2 {
            let jac = p[v] * (if v == k { 1.0 } else { 0.0 } - p[k]);
            dz[k] += dp[v] * jac;
        }
    }
    (loss, dz)
}

/// Mean focal loss of a batch and its gradient over all parameters, using
/// training-mode forward (batch statistics). `dropout_mask` fixes the kept
/// units (length n_samples x filters x 14); `None` disables dropout. Both
/// the trainer and the finite-difference check share this path.
pub fn loss_and_gradient(
    model: &ClassifierModel,
    samples: &[([f64; 15], bool)],
    dropout_mask: Option<&[bool]>,
) -> Result<(f64, Vec<f64>)> {
    let (loss, grad, _, _) = forward_backward(model, samples, dropout_mask)?;
    Ok((loss, grad))
}

/// Returns (mean loss, gradient, per-layer batch means, batch vars).
fn forward_backward(
    model: &ClassifierModel,
    samples: &[([f64; 15], bool)],
    dropout_mask: Option<&[bool]>,
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let spec = &model.spec;
    let c_out = model.layers.last().unwrap().filters;
    if let Some(mask) = dropout_mask {
        if mask.len() != n * c_out * POOLED {
            return Err(Error::InvalidArgument(format!(
                "dropout mask has {} entries, expected {}",
                mask.len(),
                n * c_out * POOLED
            )));
        }
    }
    let p = &model.params;
    let mut grad = vec![0.0; model.n_params];

    // Forward, keeping per-layer caches.
    let mut x: Vec<f64> = Vec::with_capacity(n * WIDTH);
    for (f, _) in samples {
        x.extend_from_slice(f);
    }
    let mut caches = Vec::new(); // per layer: (xhat, inv_std, normed-out pre-relu mask...)
    let mut batch_means = Vec::new();
    let mut batch_vars = Vec::new();
    for l in &model.layers {
        let count = (n * WIDTH) as f64;
        let mut mean = vec![0.0; l.c_in];
        let mut var = vec![0.0; l.c_in];
        for s in 0..n {
            for c in 0..l.c_in {
                for w in 0..WIDTH {
                    mean[c] += x[(s * l.c_in + c) * WIDTH + w];
                }
            }
        }
        for m in mean.iter_mut() {
            *m /= count;
        }
        for s in 0..n {
            for c in 0..l.c_in {
                for w in 0..WIDTH {
                    let d = x[(s * l.c_in + c) * WIDTH + w] - mean[c];
                    var[c] += d * d;
                }
            }
        }
        for v in var.iter_mut() {
            *v /= count;
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut xhat = vec![0.0; n * l.c_in * WIDTH];
        let mut normed = vec![0.0; n * l.c_in * WIDTH];
        for s in 0..n {
            for c in 0..l.c_in {
                for w in 0..WIDTH {
                    let i = (s * l.c_in + c) * WIDTH + w;
                    xhat[i] = (x[i] - mean[c]) * inv_std[c];
                    normed[i] = p[l.bn_gamma + c] * xhat[i] + p[l.bn_beta + c];
                }
            }
        }
        let pre = model.conv_forward(l, &normed, n);
        let post: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        caches.push((xhat, inv_std, normed, pre, post.clone()));
        batch_means.push(mean);
        batch_vars.push(var);
        x = post;
    }

    // Pool 15 -> 14, ties to the left slot.
    let mut pooled = vec![0.0; n * c_out * POOLED];
    let mut pool_arg = vec![0u8; n * c_out * POOLED];
    for s in 0..n {
        for c in 0..c_out {
            for w in 0..POOLED {
                let a = x[(s * c_out + c) * WIDTH + w];
                let b = x[(s * c_out + c) * WIDTH + w + 1];
                let (val, arg) = if b > a { (b, 1) } else { (a, 0) };
                pooled[(s * c_out + c) * POOLED + w] = val;
                pool_arg[(s * c_out + c) * POOLED + w] = arg;
            }
        }
    }

    // Inverted dropout.
    let keep_scale = 1.0 / (1.0 - spec.dropout);
    let mut dropped = pooled.clone();
    if let Some(mask) = dropout_mask {
        for (v, &keep) in dropped.iter_mut().zip(mask) {
            *v = if keep { *v * keep_scale } else { 0.0 };
        }
    }

    // FC + softmax + focal loss.
    let fc_in = c_out * POOLED;
    let mut loss_sum = 0.0;
    let mut dflat = vec![0.0; n * fc_in];
    let inv_n = 1.0 / n as f64;
    for (s, (_, label)) in samples.iter().enumerate() {
        let flat = &dropped[s * fc_in..(s + 1) * fc_in];
        let mut logits = [0.0f64; 2];
        for (k, logit) in logits.iter_mut().enumerate() {
            let mut acc = p[model.fc_b + k];
            for (j, f) in flat.iter().enumerate() {
                acc += p[model.fc_w + k * fc_in + j] * f;
            }
            *logit = acc;
        }
        let prob = softmax(logits);
        let (loss, dz) = focal_and_dlogits(
            prob,
            *label as usize,
            spec.gamma,
            spec.alpha1,
            spec.focal_variant,
        );
        loss_sum += loss;
        for k in 0..2 {
            let g = dz[k] * inv_n;
            grad[model.fc_b + k] += g;
            for (j, f) in flat.iter().enumerate() {
                grad[model.fc_w + k * fc_in + j] += g * f;
                dflat[s * fc_in + j] += g * p[model.fc_w + k * fc_in + j];
            }
        }
    }

    // Back through dropout and pooling.
    if let Some(mask) = dropout_mask {
        for (v, &keep) in dflat.iter_mut().zip(mask) {
            *v = if keep { *v * keep_scale } else { 0.0 };
        }
    }
    let mut dx = vec![0.0; n * c_out * WIDTH];
    for s in 0..n {
        for c in 0..c_out {
            for w in 0..POOLED {
                let i = (s * c_out + c) * POOLED + w;
                let target = w + pool_arg[i] as usize;
                dx[(s * c_out + c) * WIDTH + target] += dflat[i];
            }
        }
    }

    // Back through the conv blocks.
    for (li, l) in model.layers.iter().enumerate().rev() {
        let (xhat, inv_std, normed, pre, _post) = &caches[li];
        // ReLU gate.
        for (g, raw) in dx.iter_mut().zip(pre.iter()) {
            if *raw <= 0.0 {
                *g = 0.0;
            }
        }
        // Conv weights/bias and input gradient.
        let mut dnormed = vec![0.0; n * l.c_in * WIDTH];
        for s in 0..n {
            for f in 0..l.filters {
                let base = l.w + f * l.c_in * 3;
                for w in 0..WIDTH {
                    let g = dx[(s * l.filters + f) * WIDTH + w];
                    if g == 0.0 {
                        continue;
                    }
                    grad[l.b + f] += g;
                    for c in 0..l.c_in {
                        for k in 0..3usize {
                            let src = w + k;
                            if src >= 1 && src <= WIDTH {
                                let xi = (s * l.c_in + c) * WIDTH + src - 1;
                                grad[base + c * 3 + k] += g * normed[xi];
                                dnormed[xi] += g * p[base + c * 3 + k];
                            }
                        }
                    }
                }
            }
        }
        // Batch-norm backward (population statistics over n*WIDTH).
        let count = (n * WIDTH) as f64;
        let mut dxhat_sum = vec![0.0; l.c_in];
        let mut dxhat_dot = vec![0.0; l.c_in];
        for s in 0..n {
            for c in 0..l.c_in {
                for w in 0..WIDTH {
                    let i = (s * l.c_in + c) * WIDTH + w;
                    grad[l.bn_gamma + c] += dnormed[i] * xhat[i];
                    grad[l.bn_beta + c] += dnormed[i];
                    let dxh = dnormed[i] * p[l.bn_gamma + c];
                    dxhat_sum[c] += dxh;
                    dxhat_dot[c] += dxh * xhat[i];
                }
            }
        }
        let mut dinput = vec![0.0; n * l.c_in * WIDTH];
        for s in 0..n {
            for c in 0..l.c_in {
                for w in 0..WIDTH {
                    let i = (s * l.c_in + c) * WIDTH + w;
                    let dxh = dnormed[i] * p[l.bn_gamma + c];
                    dinput[i] =
                        inv_std[c] * (dxh - dxhat_sum[c] / count - xhat[i] * dxhat_dot[c] / count);
                }
            }
        }
        dx = dinput;
    }

    Ok((loss_sum * inv_n, grad, batch_means, batch_vars))
}

/// Trains the classifier. Both classes must be present. Deterministic for
/// fixed settings: initialization, epoch shuffles, and dropout masks all
/// flow from the configured seed.
pub fn train_classifier(
    samples: &[([f64; 15], bool)],
    spec: &ClassifierSpec,
) -> Result<ClassifierModel> {
    spec.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let positives = samples.iter().filter(|(_, l)| *l).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::InvalidArgument(
            "training set must contain both classes".into(),
        ));
    }
    let mut model = ClassifierModel::new(*spec);
    let mut rng = rng_for(spec.rng_seed, "classifier-train");
    let c_out = model.layers.last().unwrap().filters;
    let mut cache = vec![0.0; model.n_params];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(spec.batch_size) {
            let batch: Vec<([f64; 15], bool)> = chunk.iter().map(|&i| samples[i]).collect();
            let mask: Option<Vec<bool>> = if spec.dropout > 0.0 {
                Some(
                    (0..batch.len() * c_out * POOLED)
                        .map(|_| rng.gen::<f64>() >= spec.dropout)
                        .collect(),
                )
            } else {
                None
            };
            let (loss, grad, means, vars) =
                forward_backward(&model, &batch, mask.as_deref())?;
            epoch_loss += loss;
            batches += 1.0;
            for (li, (m, v)) in means.iter().zip(vars.iter()).enumerate() {
                for c in 0..m.len() {
                    model.running_mean[li][c] = 0.9 * model.running_mean[li][c] + 0.1 * m[c];
                    model.running_var[li][c] = 0.9 * model.running_var[li][c] + 0.1 * v[c];
                }
            }
            for i in 0..model.n_params {
                cache[i] = 0.9 * cache[i] + 0.1 * grad[i] * grad[i];
                model.params[i] -= spec.learning_rate * grad[i] / (cache[i].sqrt() + 1e-8);
            }
        }
        model.epoch_loss.push(epoch_loss / batches);
    }
    Ok(model)
}

pub fn save_classifier(path: &std::path::Path, model: &ClassifierModel) -> Result<()> {
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_classifier(path: &std::path::Path) -> Result<ClassifierModel> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}
