//! Single-network alternative to the two-step predictor: one feedforward
//! net maps the 15 location features straight to the six path parameters,
//! with all-zero targets standing in for non-existent paths.
//!
//! Hidden layers are tanh, the output layer is linear. The default trainer
//! is Levenberg-Marquardt on the sum of squared residuals; a plain
//! gradient-descent fallback can be selected in the settings. Inputs and
//! targets are standardized internally (the model stores the affine maps),
//! purely for numeric conditioning; predictions are returned in raw units.

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::surrogate::LabeledPath;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const N_IN: usize = 15;
const N_OUT: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OneStepSpec {
    /// Hidden layer widths; may be empty for a purely linear map.
    pub hidden: Vec<usize>,
    pub max_iterations: usize,
    /// Relative drop in SSE below which training stops.
    pub tolerance: f64,
    pub lambda_init: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Train with plain gradient descent instead of Levenberg-Marquardt.
    pub use_gradient_fallback: bool,
    pub fallback_learning_rate: f64,
    pub rng_seed: u64,
}

impl Default for OneStepSpec {
    fn default() -> Self {
        OneStepSpec {
            hidden: vec![25, 15],
            max_iterations: 200,
            tolerance: 1e-10,
            lambda_init: 1e-3,
            lambda_min: 1e-6,
            lambda_max: 1e12,
            use_gradient_fallback: false,
            fallback_learning_rate: 1e-3,
            rng_seed: 0,
        }
    }
}

impl OneStepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("hidden widths must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("tolerance must be >= 0".into()));
        }
        if !(self.lambda_init > 0.0 && self.lambda_min > 0.0 && self.lambda_max > self.lambda_min)
        {
            return Err(Error::InvalidConfig("damping bounds must be positive".into()));
        }
        if !(self.fallback_learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be > 0".into()));
        }
        Ok(())
    }

    fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(N_IN);
        d.extend_from_slice(&self.hidden);
        d.push(N_OUT);
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepModel {
    pub spec: OneStepSpec,
    /// Layer sizes including input and output.
    pub dims: Vec<usize>,
    /// Weights and biases, layer by layer: W row-major then b.
    pub params: Vec<f64>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_scale: Vec<f64>,
    pub trainer: String,
    pub iterations: usize,
    /// Overall RMSE in raw target units on the training set.
    pub final_rmse: f64,
    pub per_target_rmse: Vec<f64>,
}

struct Topology {
    dims: Vec<usize>,
    w_off: Vec<usize>,
    b_off: Vec<usize>,
    n_params: usize,
}

impl Topology {
    fn new(dims: &[usize]) -> Self {
        let layers = dims.len() - 1;
        let mut w_off = Vec::with_capacity(layers);
        let mut b_off = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            w_off.push(off);
            off += dims[l + 1] * dims[l];
            b_off.push(off);
            off += dims[l + 1];
        }
        Topology {
            dims: dims.to_vec(),
            w_off,
            b_off,
            n_params: off,
        }
    }

    fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Activations per layer; hidden layers tanh, last layer linear.
    fn forward(&self, params: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(x.to_vec());
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &params[self.w_off[l]..self.w_off[l] + n_out * n_in];
            let b = &params[self.b_off[l]..self.b_off[l] + n_out];
            let prev = &acts[l];
            let mut next = vec![0.0f64; n_out];
            for (r, nv) in next.iter_mut().enumerate() {
                let row = &w[r * n_in..(r + 1) * n_in];
                let mut z = b[r];
                for (wv, av) in row.iter().zip(prev.iter()) {
                    z += wv * av;
                }
                *nv = if l + 1 == self.layers() { z } else { z.tanh() };
            }
            acts.push(next);
        }
        acts
    }

    /// Gradient of output `o` with respect to every parameter.
    fn output_gradient(&self, params: &[f64], acts: &[Vec<f64>], o: usize, grad: &mut [f64]) {
        grad.fill(0.0);
        let layers = self.layers();
        let mut delta = vec![0.0f64; N_OUT];
        delta[o] = 1.0;
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let prev = &acts[l];
            for r in 0..n_out {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                let wrow = &mut grad[self.w_off[l] + r * n_in..self.w_off[l] + (r + 1) * n_in];
                for (g, av) in wrow.iter_mut().zip(prev.iter()) {
                    *g += d * av;
                }
                grad[self.b_off[l] + r] += d;
            }
            if l == 0 {
                break;
            }
            let w = &params[self.w_off[l]..self.w_off[l] + n_out * n_in];
            let mut below = vec![0.0f64; n_in];
            for (r, dv) in delta.iter().enumerate().take(n_out) {
                if *dv == 0.0 {
                    continue;
                }
                let row = &w[r * n_in..(r + 1) * n_in];
                for (bv, wv) in below.iter_mut().zip(row.iter()) {
                    *bv += dv * wv;
                }
            }
            // tanh' = 1 - a^2 at the layer below.
            for (bv, av) in below.iter_mut().zip(acts[l].iter()) {
                *bv *= 1.0 - av * av;
            }
            delta = below;
        }
    }
}

fn standardize(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let width = rows[0].len();
    let mut mean = vec![0.0f64; width];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0f64; width];
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            let d = v - mean[i];
            var[i] += d * d;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn apply_affine(rows: &[Vec<f64>], mean: &[f64], scale: &[f64]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(i, v)| (v - mean[i]) / scale[i])
                .collect()
        })
        .collect()
}

/// SSE plus the Gauss-Newton accumulators J'J and J'r, built sample by
/// sample in a fixed order (parallelism only spans rows of J'J) so the
/// result is bit-identical across runs and thread counts.
fn accumulate(
    topo: &Topology,
    params: &[f64],
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    jtj: Option<&mut [f64]>,
    jtr: &mut [f64],
) -> f64 {
    let p = topo.n_params;
    jtr.fill(0.0);
    let mut jtj_buf = jtj;
    if let Some(buf) = jtj_buf.as_deref_mut() {
        buf.fill(0.0);
    }
    let mut sse = 0.0;
    let mut rows = vec![vec![0.0f64; p]; N_OUT];
    for (x, y) in xs.iter().zip(ys.iter()) {
        let acts = topo.forward(params, x);
        let out = acts.last().unwrap();
        let mut resid = [0.0f64; N_OUT];
        for o in 0..N_OUT {
            resid[o] = out[o] - y[o];
            sse += resid[o] * resid[o];
            topo.output_gradient(params, &acts, o, &mut rows[o]);
            for (t, g) in jtr.iter_mut().zip(rows[o].iter()) {
                *t += resid[o] * g;
            }
        }
        if let Some(buf) = jtj_buf.as_deref_mut() {
            buf.par_chunks_mut(p).enumerate().for_each(|(r, dest)| {
                for row in rows.iter() {
                    let gr = row[r];
                    if gr != 0.0 {
                        for (d, gc) in dest.iter_mut().zip(row.iter()) {
                            *d += gr * gc;
                        }
                    }
                }
            });
        }
    }
    sse
}

fn sse_only(topo: &Topology, params: &[f64], xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    xs.iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let acts = topo.forward(params, x);
            let out = acts.last().unwrap();
            out.iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

fn init_params(topo: &Topology, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, "one-step-init");
    let mut params = vec![0.0f64; topo.n_params];
    for l in 0..topo.layers() {
        let (n_in, n_out) = (topo.dims[l], topo.dims[l + 1]);
        let bound = 1.0 / (n_in as f64).sqrt();
        for i in 0..n_out * n_in {
            params[topo.w_off[l] + i] = rng.gen_range(-bound..bound);
        }
        for i in 0..n_out {
            params[topo.b_off[l] + i] = rng.gen_range(-bound..bound);
        }
    }
    params
}

fn train_lm(
    topo: &Topology,
    params: &mut Vec<f64>,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    spec: &OneStepSpec,
) -> usize {
    let p = topo.n_params;
    let mut lambda = spec.lambda_init;
    let mut jtj = vec![0.0f64; p * p];
    let mut jtr = vec![0.0f64; p];
    let mut sse = sse_only(topo, params, xs, ys);
    let mut iterations = 0;
    for _ in 0..spec.max_iterations {
        iterations += 1;
        accumulate(topo, params, xs, ys, Some(&mut jtj), &mut jtr);
        let rhs = DVector::from_column_slice(&jtr);
        let mut accepted = false;
        // Retry the same linearization with stronger damping on rejection.
        while lambda <= spec.lambda_max {
            let a = DMatrix::from_fn(p, p, |r, c| {
                jtj[r * p + c] + if r == c { lambda } else { 0.0 }
            });
            let step = a
                .clone()
                .cholesky()
                .map(|ch| ch.solve(&rhs))
                .or_else(|| a.lu().solve(&rhs));
            if let Some(step) = step {
                let trial: Vec<f64> = params
                    .iter()
                    .zip(step.iter())
                    .map(|(v, d)| v - d)
                    .collect();
                let trial_sse = sse_only(topo, &trial, xs, ys);
                if trial_sse.is_finite() && trial_sse < sse {
                    *params = trial;
                    let drop = sse - trial_sse;
                    sse = trial_sse;
                    lambda = (lambda / 10.0).max(spec.lambda_min);
                    accepted = true;
                    if drop <= spec.tolerance * sse.max(f64::MIN_POSITIVE) {
                        return iterations;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    iterations
}

fn train_gd(
    topo: &Topology,
    params: &mut [f64],
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    spec: &OneStepSpec,
) -> usize {
    let mut jtr = vec![0.0f64; topo.n_params];
    let scale = 2.0 / (xs.len() * N_OUT) as f64;
    for it in 0..spec.max_iterations {
        accumulate(topo, params, xs, ys, None, &mut jtr);
        for (v, g) in params.iter_mut().zip(jtr.iter()) {
            *v -= spec.fallback_learning_rate * scale * g;
        }
        if jtr.iter().all(|g| g.abs() * scale < 1e-14) {
            return it + 1;
        }
    }
    spec.max_iterations
}

/// Trains the single-network predictor on every candidate path (existent
/// or not; absent paths carry all-zero targets).
pub fn train_one_step(samples: &[LabeledPath], spec: &OneStepSpec) -> Result<OneStepModel> {
    spec.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let xs_raw: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.candidate.features.to_vec())
        .collect();
    let ys_raw: Vec<Vec<f64>> = samples.iter().map(|s| s.targets.to_vec()).collect();
    if xs_raw
        .iter()
        .flatten()
        .chain(ys_raw.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidArgument(
            "training data must be finite".into(),
        ));
    }
    let (input_mean, input_scale) = standardize(&xs_raw);
    let (target_mean, target_scale) = standardize(&ys_raw);
    let xs = apply_affine(&xs_raw, &input_mean, &input_scale);
    let ys = apply_affine(&ys_raw, &target_mean, &target_scale);

    let topo = Topology::new(&spec.dims());
    let mut params = init_params(&topo, spec.rng_seed);
    let (trainer, iterations) = if spec.use_gradient_fallback {
        ("gradient-descent", train_gd(&topo, &mut params, &xs, &ys, spec))
    } else {
        (
            "levenberg-marquardt",
            train_lm(&topo, &mut params, &xs, &ys, spec),
        )
    };

    let mut model = OneStepModel {
        spec: spec.clone(),
        dims: topo.dims.clone(),
        params,
        input_mean,
        input_scale,
        target_mean,
        target_scale,
        trainer: trainer.to_string(),
        iterations,
        final_rmse: 0.0,
        per_target_rmse: vec![0.0; N_OUT],
    };
    let mut sq = [0.0f64; N_OUT];
    for s in samples {
        let pred = model.predict(&s.candidate.features);
        for o in 0..N_OUT {
            let d = pred[o] - s.targets[o];
            sq[o] += d * d;
        }
    }
    let n = samples.len() as f64;
    model.per_target_rmse = sq.iter().map(|v| (v / n).sqrt()).collect();
    model.final_rmse = (sq.iter().sum::<f64>() / (n * N_OUT as f64)).sqrt();
    Ok(model)
}

impl OneStepModel {
    pub fn predict(&self, features: &[f64; 15]) -> [f64; 6] {
        let topo = Topology::new(&self.dims);
        let x: Vec<f64> = features
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.input_mean[i]) / self.input_scale[i])
            .collect();
        let acts = topo.forward(&self.params, &x);
        let out = acts.last().unwrap();
        let mut raw = [0.0f64; 6];
        for (o, rv) in raw.iter_mut().enumerate() {
            *rv = out[o] * self.target_scale[o] + self.target_mean[o];
        }
        raw
    }
}

pub fn save_one_step(path: &std::path::Path, model: &OneStepModel) -> Result<()> {
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_one_step(path: &std::path::Path) -> Result<OneStepModel> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}
