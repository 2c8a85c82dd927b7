//! Feedforward classification network built from scratch: He initialization,
//! batch normalization, ReLU, a softmax head, exact backpropagation
//! (including gradient flow through the batch statistics), Adam, and a
//! streaming training loop that labels freshly sampled syndromes with the
//! logical class left behind by excitation removal.
//!
//! Everything is plain `f64` on flat row-major buffers; the only numerics
//! dependencies are the RNG crates used for initialization and sampling.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::codes::CodeLattice;
use crate::exgraph::ExcitationGraph;
use crate::noise::{bulk_neighbor_count, trial_rng, NoiseError, NoiseKind, NoiseModel};
use crate::pauli::{logical_class, Pauli};

/// Variance floor inside batch-norm denominators.
pub const BN_EPSILON: f64 = 1e-5;
/// Probability clip applied before taking logs in the loss.
pub const CLIP_EPSILON: f64 = 1e-12;

#[derive(Error, Debug)]
pub enum MlpError {
    #[error("train-mode forward needs a batch of at least 2, got {0}")]
    BatchTooSmall(usize),
    #[error("input width {got} does not match the expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("model was trained for lattice {stored:#018x}, not {expected:#018x}")]
    FingerprintMismatch { stored: u64, expected: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

// ---------------------------------------------------------------------------
// Flat row-major matrices and the three product shapes the network needs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Mat {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[inline(always)]
fn madd(acc: f64, x: f64, y: f64) -> f64 {
    // fused when the hardware has it (one instruction, no intermediate
    // rounding); plain multiply-add otherwise, where mul_add would fall back
    // to a slow soft-float routine
    if cfg!(target_feature = "fma") {
        x.mul_add(y, acc)
    } else {
        acc + x * y
    }
}

/// Dot product over four independent blocks of eight accumulators: wide
/// enough to vectorize despite strict float semantics, and enough chains in
/// flight to hide the add/fma latency.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [[0.0f64; 8]; 4];
    let mut ac = a.chunks_exact(32);
    let mut bc = b.chunks_exact(32);
    for (ca, cb) in ac.by_ref().zip(bc.by_ref()) {
        for (blk, accb) in acc.iter_mut().enumerate() {
            for k in 0..8 {
                let i = blk * 8 + k;
                accb[k] = madd(accb[k], ca[i], cb[i]);
            }
        }
    }
    let mut tail = [0.0f64; 8];
    let ar = ac.remainder();
    let br = bc.remainder();
    let mut tc = ar.chunks_exact(8);
    let mut uc = br.chunks_exact(8);
    for (ca, cb) in tc.by_ref().zip(uc.by_ref()) {
        for k in 0..8 {
            tail[k] = madd(tail[k], ca[k], cb[k]);
        }
    }
    for k in 0..8 {
        tail[k] += (acc[0][k] + acc[1][k]) + (acc[2][k] + acc[3][k]);
    }
    let mut s = ((tail[0] + tail[1]) + (tail[2] + tail[3]))
        + ((tail[4] + tail[5]) + (tail[6] + tail[7]));
    for (x, y) in tc.remainder().iter().zip(uc.remainder()) {
        s = madd(s, *x, *y);
    }
    s
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = madd(*yi, alpha, *xi);
    }
}

/// Four dot products against a shared left operand: the row of `a` is loaded
/// once per lane while four independent accumulator chains stay in flight.
fn dot4(a: &[f64], b0: &[f64], b1: &[f64], b2: &[f64], b3: &[f64]) -> [f64; 4] {
    let n = a.len();
    let (b0, b1, b2, b3) = (&b0[..n], &b1[..n], &b2[..n], &b3[..n]);
    let mut acc = [[0.0f64; 8]; 4];
    let main = n - n % 8;
    let mut base = 0;
    while base < main {
        for k in 0..8 {
            let i = base + k;
            let x = a[i];
            acc[0][k] = madd(acc[0][k], x, b0[i]);
            acc[1][k] = madd(acc[1][k], x, b1[i]);
            acc[2][k] = madd(acc[2][k], x, b2[i]);
            acc[3][k] = madd(acc[3][k], x, b3[i]);
        }
        base += 8;
    }
    let mut out = [0.0f64; 4];
    for (o, accb) in out.iter_mut().zip(&acc) {
        *o = ((accb[0] + accb[1]) + (accb[2] + accb[3]))
            + ((accb[4] + accb[5]) + (accb[6] + accb[7]));
    }
    for i in main..n {
        let x = a[i];
        out[0] = madd(out[0], x, b0[i]);
        out[1] = madd(out[1], x, b1[i]);
        out[2] = madd(out[2], x, b2[i]);
        out[3] = madd(out[3], x, b3[i]);
    }
    out
}

/// `y += c0·x0 + c1·x1 + c2·x2 + c3·x3`, loading and storing `y` once.
fn axpy4(y: &mut [f64], c: [f64; 4], x0: &[f64], x1: &[f64], x2: &[f64], x3: &[f64]) {
    let n = y.len();
    let (x0, x1, x2, x3) = (&x0[..n], &x1[..n], &x2[..n], &x3[..n]);
    for i in 0..n {
        let v = madd(madd(madd(madd(y[i], c[0], x0[i]), c[1], x1[i]), c[2], x2[i]), c[3], x3[i]);
        y[i] = v;
    }
}

/// `a (m×k) · bᵀ (n×k) -> m×n`; both operands are walked along contiguous
/// rows, which is the layout the affine forward pass wants.
fn mul_nt(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.cols);
    let mut out = Mat::zeros(a.rows, b.rows);
    let jmain = b.rows - b.rows % 4;
    for i in 0..a.rows {
        let ar = a.row(i);
        let or = out.row_mut(i);
        let mut j = 0;
        while j < jmain {
            or[j..j + 4].copy_from_slice(&dot4(
                ar,
                b.row(j),
                b.row(j + 1),
                b.row(j + 2),
                b.row(j + 3),
            ));
            j += 4;
        }
        for (oj, jj) in or[jmain..].iter_mut().zip(jmain..b.rows) {
            *oj = dot(ar, b.row(jj));
        }
    }
    out
}

/// `a (m×n) · b (n×k) -> m×k`, accumulating scaled rows of `b` four at a
/// time into each output row.
fn mul_nn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows);
    let mut out = Mat::zeros(a.rows, b.cols);
    let jmain = a.cols - a.cols % 4;
    for i in 0..a.rows {
        let or = out.row_mut(i);
        let ar = a.row(i);
        let mut j = 0;
        while j < jmain {
            axpy4(
                or,
                [ar[j], ar[j + 1], ar[j + 2], ar[j + 3]],
                b.row(j),
                b.row(j + 1),
                b.row(j + 2),
                b.row(j + 3),
            );
            j += 4;
        }
        for (jj, &c) in (jmain..a.cols).zip(&ar[jmain..]) {
            if c != 0.0 {
                axpy(or, c, b.row(jj));
            }
        }
    }
    out
}

/// `aᵀ (n×m) · b (m×k) -> n×k` for gradient accumulation `δᵀ·X`, folding
/// four samples into each output row per pass.
fn mul_tn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.rows, b.rows);
    let mut out = Mat::zeros(a.cols, b.cols);
    let imain = a.rows - a.rows % 4;
    let mut i = 0;
    while i < imain {
        for j in 0..a.cols {
            axpy4(
                out.row_mut(j),
                [
                    a.data[i * a.cols + j],
                    a.data[(i + 1) * a.cols + j],
                    a.data[(i + 2) * a.cols + j],
                    a.data[(i + 3) * a.cols + j],
                ],
                b.row(i),
                b.row(i + 1),
                b.row(i + 2),
                b.row(i + 3),
            );
        }
        i += 4;
    }
    for ii in imain..a.rows {
        let br = b.row(ii);
        for (j, &c) in a.row(ii).iter().enumerate() {
            if c != 0.0 {
                axpy(out.row_mut(j), c, br);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// One fully connected hidden layer: affine, then batch normalization, then
/// ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenLayer {
    pub fan_in: usize,
    pub width: usize,
    /// `width × fan_in`, row-major by output unit.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub input_dim: usize,
    pub out_dim: usize,
    pub hidden: Vec<HiddenLayer>,
    /// `out_dim × last_hidden_width`, row-major.
    pub head_weights: Vec<f64>,
    pub head_bias: Vec<f64>,
}

/// Everything the backward pass and the running-statistics update need from
/// one train-mode forward evaluation.
pub struct TrainCache {
    /// `acts[0]` is the input batch; `acts[l+1]` the output of hidden layer l.
    acts: Vec<Mat>,
    xhat: Vec<Mat>,
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
    inv_std: Vec<Vec<f64>>,
    pub probs: Mat,
}

/// Per-parameter-group gradients, in the same order as
/// [`Network::param_groups_mut`].
pub struct Gradients {
    hidden: Vec<LayerGrads>,
    head_w: Vec<f64>,
    head_b: Vec<f64>,
}

struct LayerGrads {
    w: Vec<f64>,
    b: Vec<f64>,
    gamma: Vec<f64>,
    beta: Vec<f64>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Gradients {
        Gradients {
            hidden: net
                .hidden
                .iter()
                .map(|l| LayerGrads {
                    w: vec![0.0; l.weights.len()],
                    b: vec![0.0; l.bias.len()],
                    gamma: vec![0.0; l.gamma.len()],
                    beta: vec![0.0; l.beta.len()],
                })
                .collect(),
            head_w: vec![0.0; net.head_weights.len()],
            head_b: vec![0.0; net.head_bias.len()],
        }
    }

    pub fn groups(&self) -> Vec<&[f64]> {
        let mut g: Vec<&[f64]> = Vec::new();
        for l in &self.hidden {
            g.push(&l.w);
            g.push(&l.b);
            g.push(&l.gamma);
            g.push(&l.beta);
        }
        g.push(&self.head_w);
        g.push(&self.head_b);
        g
    }

    fn groups_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut g: Vec<&mut Vec<f64>> = Vec::new();
        for l in &mut self.hidden {
            g.push(&mut l.w);
            g.push(&mut l.b);
            g.push(&mut l.gamma);
            g.push(&mut l.beta);
        }
        g.push(&mut self.head_w);
        g.push(&mut self.head_b);
        g
    }
}

/// He initialization: every weight is a zero-mean Gaussian with variance
/// `2 / fan_in`; biases start at zero, batch-norm scales at one, shifts at
/// zero, running means at zero and running variances at one.
///
/// RNG consumption order (part of the determinism contract): the hidden
/// layers in order, each weight matrix row-major, then the head weights
/// row-major. Nothing else draws.
pub fn he_init<R: Rng + ?Sized>(
    input_dim: usize,
    hidden_widths: &[usize],
    out_dim: usize,
    rng: &mut R,
) -> Network {
    let mut hidden = Vec::with_capacity(hidden_widths.len());
    let mut fan_in = input_dim;
    for &width in hidden_widths {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
        hidden.push(HiddenLayer {
            fan_in,
            width,
            weights: (0..width * fan_in).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; width],
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        });
        fan_in = width;
    }
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
    Network {
        input_dim,
        out_dim,
        hidden,
        head_weights: (0..out_dim * fan_in).map(|_| normal.sample(rng)).collect(),
        head_bias: vec![0.0; out_dim],
    }
}

fn softmax_rows(logits: &mut Mat) {
    for i in 0..logits.rows {
        let row = logits.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

impl Network {
    fn affine(&self, layer: usize, x: &Mat) -> Mat {
        let l = &self.hidden[layer];
        let w = Mat { rows: l.width, cols: l.fan_in, data: l.weights.clone() };
        let mut a = mul_nt(x, &w);
        for i in 0..a.rows {
            for (v, b) in a.row_mut(i).iter_mut().zip(&l.bias) {
                *v += b;
            }
        }
        a
    }

    fn head(&self, x: &Mat) -> Mat {
        let w = Mat {
            rows: self.out_dim,
            cols: self.hidden.last().map_or(self.input_dim, |l| l.width),
            data: self.head_weights.clone(),
        };
        let mut z = mul_nt(x, &w);
        for i in 0..z.rows {
            for (v, b) in z.row_mut(i).iter_mut().zip(&self.head_bias) {
                *v += b;
            }
        }
        z
    }

    fn check_input(&self, x: &Mat) -> Result<(), MlpError> {
        if x.cols != self.input_dim {
            return Err(MlpError::DimensionMismatch { expected: self.input_dim, got: x.cols });
        }
        Ok(())
    }

    /// Train-mode forward pass: normalize by batch statistics. Pure — the
    /// running statistics are updated separately by
    /// [`update_running_stats`](Self::update_running_stats) so that repeated
    /// evaluation (finite differences) does not mutate the network.
    pub fn forward_train(&self, x: &Mat) -> Result<TrainCache, MlpError> {
        self.check_input(x)?;
        if x.rows < 2 {
            return Err(MlpError::BatchTooSmall(x.rows));
        }
        let b = x.rows as f64;
        let mut cache = TrainCache {
            acts: vec![x.clone()],
            xhat: Vec::new(),
            mean: Vec::new(),
            var: Vec::new(),
            inv_std: Vec::new(),
            probs: Mat::zeros(0, 0),
        };
        for li in 0..self.hidden.len() {
            let a = self.affine(li, cache.acts.last().unwrap());
            let w = a.cols;
            let mut mean = vec![0.0; w];
            for i in 0..a.rows {
                for (m, v) in mean.iter_mut().zip(a.row(i)) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= b;
            }
            let mut var = vec![0.0; w];
            for i in 0..a.rows {
                for (j, v) in a.row(i).iter().enumerate() {
                    let d = v - mean[j];
                    var[j] += d * d;
                }
            }
            for v in &mut var {
                *v /= b;
            }
            let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
            let mut xhat = Mat::zeros(a.rows, w);
            let mut out = Mat::zeros(a.rows, w);
            let layer = &self.hidden[li];
            for i in 0..a.rows {
                for j in 0..w {
                    let xh = (a.row(i)[j] - mean[j]) * inv_std[j];
                    xhat.row_mut(i)[j] = xh;
                    out.row_mut(i)[j] = (layer.gamma[j] * xh + layer.beta[j]).max(0.0);
                }
            }
            cache.xhat.push(xhat);
            cache.mean.push(mean);
            cache.var.push(var);
            cache.inv_std.push(inv_std);
            cache.acts.push(out);
        }
        let mut probs = self.head(cache.acts.last().unwrap());
        softmax_rows(&mut probs);
        cache.probs = probs;
        Ok(cache)
    }

    /// Fold the batch statistics of a cached forward pass into the running
    /// statistics: `r ← momentum·r + (1 − momentum)·batch`.
    pub fn update_running_stats(&mut self, cache: &TrainCache, momentum: f64) {
        for (li, layer) in self.hidden.iter_mut().enumerate() {
            for j in 0..layer.width {
                layer.running_mean[j] =
                    momentum * layer.running_mean[j] + (1.0 - momentum) * cache.mean[li][j];
                layer.running_var[j] =
                    momentum * layer.running_var[j] + (1.0 - momentum) * cache.var[li][j];
            }
        }
    }

    /// Inference-mode forward pass: normalize by running statistics. Each row
    /// is processed independently, so the output for a sample never depends
    /// on what else is in the batch.
    pub fn forward_infer(&self, x: &Mat) -> Result<Mat, MlpError> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for li in 0..self.hidden.len() {
            let mut a = self.affine(li, &cur);
            let layer = &self.hidden[li];
            for i in 0..a.rows {
                for (j, v) in a.row_mut(i).iter_mut().enumerate() {
                    let xh =
                        (*v - layer.running_mean[j]) / (layer.running_var[j] + BN_EPSILON).sqrt();
                    *v = (layer.gamma[j] * xh + layer.beta[j]).max(0.0);
                }
            }
            cur = a;
        }
        let mut probs = self.head(&cur);
        softmax_rows(&mut probs);
        Ok(probs)
    }

    /// Exact gradients of [`cross_entropy`] with respect to every parameter
    /// group, including the flow through the batch mean and variance.
    pub fn backprop(&self, cache: &TrainCache, labels: &[usize]) -> Result<Gradients, MlpError> {
        let bsz = cache.probs.rows;
        if labels.len() != bsz {
            return Err(MlpError::DimensionMismatch { expected: bsz, got: labels.len() });
        }
        let b = bsz as f64;
        let mut grads = Gradients::zeros_like(self);

        // loss -> logits, through the clip and the softmax Jacobian
        let mut dz = Mat::zeros(bsz, self.out_dim);
        for (i, &label) in labels.iter().enumerate() {
            let f = cache.probs.row(i);
            let mut g = vec![0.0; self.out_dim];
            for (c, gc) in g.iter_mut().enumerate() {
                let fc = f[c];
                if fc <= CLIP_EPSILON || fc >= 1.0 - CLIP_EPSILON {
                    continue; // clipped coordinates are flat
                }
                let y = if label == c { 1.0 } else { 0.0 };
                *gc = (-y / fc + (1.0 - y) / (1.0 - fc)) / b;
            }
            let gf = dot(&g, f);
            for (k, v) in dz.row_mut(i).iter_mut().enumerate() {
                *v = f[k] * (g[k] - gf);
            }
        }

        // head affine
        let last = cache.acts.last().unwrap();
        grads.head_w = mul_tn(&dz, last).data;
        for i in 0..bsz {
            for (gb, v) in grads.head_b.iter_mut().zip(dz.row(i)) {
                *gb += v;
            }
        }
        let head_w = Mat {
            rows: self.out_dim,
            cols: last.cols,
            data: self.head_weights.clone(),
        };
        let mut dout = mul_nn(&dz, &head_w);

        // hidden layers, in reverse
        for li in (0..self.hidden.len()).rev() {
            let layer = &self.hidden[li];
            let out = &cache.acts[li + 1];
            let xhat = &cache.xhat[li];
            let inv_std = &cache.inv_std[li];
            let w = layer.width;

            // ReLU mask, then batch-norm scale/shift grads
            let mut dxhat = Mat::zeros(bsz, w);
            let lg = &mut grads.hidden[li];
            let mut sum_dxhat = vec![0.0; w];
            let mut sum_dxhat_xhat = vec![0.0; w];
            for i in 0..bsz {
                for j in 0..w {
                    let dy = if out.row(i)[j] > 0.0 { dout.row(i)[j] } else { 0.0 };
                    let xh = xhat.row(i)[j];
                    lg.beta[j] += dy;
                    lg.gamma[j] += dy * xh;
                    let dxh = dy * layer.gamma[j];
                    dxhat.row_mut(i)[j] = dxh;
                    sum_dxhat[j] += dxh;
                    sum_dxhat_xhat[j] += dxh * xh;
                }
            }
            // through the batch statistics
            let mut da = Mat::zeros(bsz, w);
            for i in 0..bsz {
                for j in 0..w {
                    da.row_mut(i)[j] = inv_std[j] / b
                        * (b * dxhat.row(i)[j]
                            - sum_dxhat[j]
                            - xhat.row(i)[j] * sum_dxhat_xhat[j]);
                }
            }
            // affine
            let input = &cache.acts[li];
            lg.w = mul_tn(&da, input).data;
            for i in 0..bsz {
                for (gb, v) in lg.b.iter_mut().zip(da.row(i)) {
                    *gb += v;
                }
            }
            if li > 0 {
                let wmat = Mat { rows: w, cols: layer.fan_in, data: layer.weights.clone() };
                dout = mul_nn(&da, &wmat);
            }
        }
        Ok(grads)
    }

    pub fn param_groups_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut g: Vec<&mut Vec<f64>> = Vec::new();
        for l in &mut self.hidden {
            g.push(&mut l.weights);
            g.push(&mut l.bias);
            g.push(&mut l.gamma);
            g.push(&mut l.beta);
        }
        g.push(&mut self.head_weights);
        g.push(&mut self.head_bias);
        g
    }

    /// Inference on a single input; returns the argmax class (ties broken
    /// toward the lowest index) and the full probability vector.
    pub fn predict(&self, input: &[f64]) -> Result<(usize, Vec<f64>), MlpError> {
        let x = Mat { rows: 1, cols: input.len(), data: input.to_vec() };
        let probs = self.forward_infer(&x)?;
        let row = probs.row(0);
        let mut best = 0;
        for (k, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = k;
            }
        }
        Ok((best, row.to_vec()))
    }
}

/// Batch-mean classification loss: per sample, the summed two-sided
/// cross-entropy over classes,
/// `−Σ_c [ y_c·ln f_c + (1−y_c)·ln(1−f_c) ]`,
/// with predictions clipped to `[CLIP_EPSILON, 1−CLIP_EPSILON]`.
pub fn cross_entropy(probs: &Mat, labels: &[usize]) -> Result<f64, MlpError> {
    if labels.len() != probs.rows {
        return Err(MlpError::DimensionMismatch { expected: probs.rows, got: labels.len() });
    }
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= probs.cols {
            return Err(MlpError::DimensionMismatch { expected: probs.cols, got: label });
        }
        for (c, &p) in probs.row(i).iter().enumerate() {
            let p = p.clamp(CLIP_EPSILON, 1.0 - CLIP_EPSILON);
            let y = if c == label { 1.0 } else { 0.0 };
            total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        }
    }
    Ok(total / probs.rows as f64)
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

pub struct AdamState {
    params: AdamParams,
    t: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(net: &Network, params: AdamParams) -> AdamState {
        AdamState {
            params,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// One bias-corrected Adam update over every parameter group.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t += 1;
        let p = self.params;
        let bc1 = 1.0 - p.beta1.powi(self.t as i32);
        let bc2 = 1.0 - p.beta2.powi(self.t as i32);
        for ((param, grad), (m, v)) in net
            .param_groups_mut()
            .into_iter()
            .zip(grads.groups())
            .zip(self.m.groups_mut().into_iter().zip(self.v.groups_mut()))
        {
            for k in 0..param.len() {
                let g = grad[k];
                m[k] = p.beta1 * m[k] + (1.0 - p.beta1) * g;
                v[k] = p.beta2 * v[k] + (1.0 - p.beta2) * g * g;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                param[k] -= p.learning_rate * mhat / (vhat.sqrt() + p.epsilon);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

/// Hyperparameters of one training run. `curriculum` is the error-rate
/// schedule: `(effective rate, steps)` stages, nondecreasing in rate, whose
/// step counts sum to `steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub adam: AdamParams,
    pub bn_momentum: f64,
    pub curriculum: Vec<(f64, usize)>,
}

impl PartialEq for AdamParams {
    fn eq(&self, other: &Self) -> bool {
        self.learning_rate == other.learning_rate
            && self.beta1 == other.beta1
            && self.beta2 == other.beta2
            && self.epsilon == other.epsilon
    }
}

/// Tuned `(hidden layers, width, batch, steps)` per (code, noise, distance),
/// from the grid searches behind the benchmark configurations.
pub fn tuned_hyperparameters(
    kind: crate::codes::CodeKind,
    noise: NoiseKind,
    d: usize,
) -> Option<(usize, usize, usize, usize)> {
    use crate::codes::CodeKind::*;
    use NoiseKind::*;
    let rows: &[(usize, usize, usize, usize, usize)] = match (kind, noise) {
        (ColorCode, BitPhaseFlip) => &[
            (5, 3, 100, 1_000, 30_000),
            (7, 5, 200, 5_000, 50_000),
            (9, 7, 400, 10_000, 110_000),
            (11, 9, 800, 10_000, 210_000),
        ],
        (ColorCode, Depolarizing) => &[
            (5, 3, 200, 10_000, 110_000),
            (7, 5, 600, 10_000, 300_000),
            (9, 7, 1_400, 10_000, 410_000),
        ],
        (ColorCode, NNDepolarizing) => &[
            (5, 3, 200, 5_000, 60_000),
            (7, 5, 400, 10_000, 110_000),
            (9, 7, 800, 10_000, 210_000),
            (11, 9, 1_600, 10_000, 410_000),
        ],
        (TwistedToricCode, BitPhaseFlip) => &[
            (5, 3, 100, 1_000, 30_000),
            (7, 5, 200, 10_000, 60_000),
            (9, 7, 400, 10_000, 160_000),
            (11, 9, 800, 10_000, 260_000),
        ],
        (TwistedToricCode, Depolarizing) => &[
            (5, 3, 200, 5_000, 30_000),
            (7, 5, 600, 10_000, 110_000),
            (9, 7, 1_200, 10_000, 210_000),
        ],
        (TwistedToricCode, NNDepolarizing) => &[
            (5, 3, 200, 5_000, 60_000),
            (7, 5, 400, 10_000, 110_000),
            (9, 7, 800, 10_000, 210_000),
            (11, 9, 1_600, 10_000, 410_000),
        ],
    };
    rows.iter()
        .find(|&&(rd, ..)| rd == d)
        .map(|&(_, h, n, b, t)| (h, n, b, t))
}

impl TrainingConfig {
    /// Tuned hyperparameters when available, otherwise the scaling rule
    /// `H_d = d − 2` hidden layers and width doubling per two distance steps
    /// from the nearest tuned row; small codes (d=3) get a deliberately
    /// down-scaled configuration since 64 distinct syndromes don't warrant
    /// more. The curriculum is the default two-stage schedule of
    /// [`with_target`](Self::with_target).
    pub fn for_code(
        kind: crate::codes::CodeKind,
        noise: NoiseKind,
        d: usize,
        target_p_eff: f64,
    ) -> TrainingConfig {
        let (h, n, b, t) = tuned_hyperparameters(kind, noise, d).unwrap_or_else(|| {
            if d == 3 {
                return (1, 64, 1_024, 20_000);
            }
            // scale from the nearest tuned distance for this (code, noise)
            let (nd, (_, nn, nb, nt)) = [5usize, 7, 9, 11]
                .iter()
                .filter_map(|&rd| tuned_hyperparameters(kind, noise, rd).map(|r| (rd, r)))
                .min_by_key(|&(rd, _)| rd.abs_diff(d))
                .expect("every (code, noise) pair has tuned rows");
            let scale = 2f64.powf((d as f64 - nd as f64) / 2.0);
            (d - 2, ((nn as f64) * scale).round() as usize, nb, nt)
        });
        TrainingConfig {
            hidden_layers: h,
            width: n,
            batch_size: b,
            steps: t,
            adam: AdamParams::default(),
            bn_momentum: 0.9,
            curriculum: Vec::new(),
        }
        .with_target(target_p_eff)
    }

    /// Default two-stage curriculum: the first third of the steps at half the
    /// target effective rate, the remainder at the target.
    pub fn with_target(mut self, target_p_eff: f64) -> TrainingConfig {
        let first = self.steps.div_ceil(3);
        self.curriculum = vec![(target_p_eff / 2.0, first), (target_p_eff, self.steps - first)];
        self
    }

    /// Single-stage schedule: every step at the target rate.
    pub fn direct_at(mut self, target_p_eff: f64) -> TrainingConfig {
        self.curriculum = vec![(target_p_eff, self.steps)];
        self
    }

    /// Check the structural invariants; returns advisory warnings (currently
    /// only the minimal-batch-size caution) on success.
    pub fn validate(&self) -> Result<Vec<String>, MlpError> {
        if self.hidden_layers == 0 || self.width == 0 || self.steps == 0 {
            return Err(MlpError::BadConfig("sizes must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(MlpError::BadConfig("batch size must be at least 2".into()));
        }
        if self.curriculum.is_empty() {
            return Err(MlpError::BadConfig("curriculum must have at least one stage".into()));
        }
        if !self.curriculum.windows(2).all(|w| w[0].0 <= w[1].0) {
            return Err(MlpError::BadConfig(
                "curriculum stages must be nondecreasing in error rate".into(),
            ));
        }
        if self.curriculum.iter().any(|&(p, s)| !(0.0..1.0).contains(&p) || s == 0) {
            return Err(MlpError::BadConfig(
                "every stage needs a rate in [0,1) and at least one step".into(),
            ));
        }
        let total: usize = self.curriculum.iter().map(|&(_, s)| s).sum();
        if total != self.steps {
            return Err(MlpError::BadConfig(format!(
                "curriculum stages cover {total} steps but the config promises {}",
                self.steps
            )));
        }
        let mut warnings = Vec::new();
        if self.batch_size < 256 {
            warnings.push(format!(
                "batch size {} is below 256; gradient estimates may be too noisy to converge",
                self.batch_size
            ));
        }
        Ok(warnings)
    }
}

// ---------------------------------------------------------------------------
// Streaming training on syndrome classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    pub p_eff: f64,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainingLog {
    pub entries: Vec<LogEntry>,
    pub warnings: Vec<String>,
    /// Mean batch accuracy over the final tenth of the run.
    pub final_accuracy: f64,
    /// Hit rate of always guessing the most common class in that window.
    pub baseline_accuracy: f64,
    pub samples_seen: u64,
}

/// Head layout of a trained decoder model.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelMode {
    /// One 4-class network reading the full syndrome.
    Joint(Network),
    /// Two 2-class networks on the two syndrome halves of a CSS code: the X
    /// head reads the Z-type generators (which detect X errors), the Z head
    /// the X-type generators.
    Css {
        x_head: Network,
        z_head: Network,
        x_inputs: Vec<usize>,
        z_inputs: Vec<usize>,
    },
}

/// A trained classifier bound to one lattice (by fingerprint), plus the
/// metadata of the run that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderModel {
    pub mode: ModelMode,
    pub fingerprint: u64,
    pub meta: Vec<(String, String)>,
}

/// Which head layout `train_decoder` should produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadSplit {
    Joint,
    CssHalves,
}

/// Generator index halves of a CSS lattice: `(x_inputs, z_inputs)` where
/// `x_inputs` are the Z-type generators (sensitive to X errors) and
/// `z_inputs` the X-type ones.
pub fn css_partition(lattice: &CodeLattice) -> Result<(Vec<usize>, Vec<usize>), MlpError> {
    let mut x_inputs = Vec::new();
    let mut z_inputs = Vec::new();
    for (i, g) in lattice.stabilizers.generators.iter().enumerate() {
        let letters: Vec<Pauli> = g.support().iter().map(|&q| g.get(q)).collect();
        if letters.iter().all(|&l| l == Pauli::Z) {
            x_inputs.push(i);
        } else if letters.iter().all(|&l| l == Pauli::X) {
            z_inputs.push(i);
        } else {
            return Err(MlpError::BadConfig(
                "split heads need a CSS lattice with pure-letter generators".into(),
            ));
        }
    }
    Ok((x_inputs, z_inputs))
}

struct SampleBatch {
    /// Full syndromes, one row per sample.
    inputs: Mat,
    /// 4-class labels (Pauli discriminants of the residual class).
    labels: Vec<usize>,
}

/// Draw one labeled batch. Sample `i` of step `step` consumes the stream
/// `step·B + i` of the master seed, so generation is replayable sample by
/// sample and independent of batching.
fn sample_batch(
    lattice: &CodeLattice,
    graph: &ExcitationGraph,
    model: &NoiseModel,
    master_seed: u64,
    step: usize,
    batch: usize,
) -> SampleBatch {
    let syn_len = lattice.num_generators();
    let mut inputs = Mat::zeros(batch, syn_len);
    let mut labels = Vec::with_capacity(batch);
    for i in 0..batch {
        let stream = (step * batch + i) as u64;
        let mut rng = trial_rng(master_seed, stream);
        let error = model.sample(lattice, &mut rng);
        let syndrome = lattice.stabilizers.syndrome(&error);
        let exc = graph
            .excitations_from_syndrome(&syndrome)
            .expect("graph built from this lattice");
        let removal = graph.removal_operator(&exc).expect("valid excitation set");
        let residual = removal.multiply(&error);
        let class = logical_class(&residual, &lattice.logical_x, &lattice.logical_z);
        for (slot, &bit) in inputs.row_mut(i).iter_mut().zip(&syndrome) {
            *slot = bit as u8 as f64;
        }
        labels.push(class as usize);
    }
    SampleBatch { inputs, labels }
}

fn gather_columns(full: &Mat, cols: &[usize]) -> Mat {
    let mut out = Mat::zeros(full.rows, cols.len());
    for i in 0..full.rows {
        let src = full.row(i);
        for (slot, &c) in out.row_mut(i).iter_mut().zip(cols) {
            *slot = src[c];
        }
    }
    out
}

/// Train a logical-class predictor by streaming freshly sampled errors
/// (nothing is persisted) through mini-batch Adam along the curriculum.
///
/// Randomness: network initialization draws from stream `u64::MAX` (and
/// `u64::MAX − 1` for the second head) of the master seed; sample `i` of step
/// `t` draws from stream `t·B + i`. Evaluation harnesses must use a different
/// master seed to stay disjoint.
pub fn train_decoder(
    lattice: &CodeLattice,
    graph: &ExcitationGraph,
    noise: NoiseKind,
    config: &TrainingConfig,
    master_seed: u64,
    split: HeadSplit,
) -> Result<(DecoderModel, TrainingLog), MlpError> {
    train_decoder_logged(lattice, graph, noise, config, master_seed, split, |_| {})
}

/// [`train_decoder`] with a callback invoked on every log entry as it is
/// produced, for live progress reporting on long runs.
pub fn train_decoder_logged(
    lattice: &CodeLattice,
    graph: &ExcitationGraph,
    noise: NoiseKind,
    config: &TrainingConfig,
    master_seed: u64,
    split: HeadSplit,
    mut on_log: impl FnMut(&LogEntry),
) -> Result<(DecoderModel, TrainingLog), MlpError> {
    let warnings = config.validate()?;
    let bulk = bulk_neighbor_count(lattice);
    let stages: Vec<(NoiseModel, usize, f64)> = config
        .curriculum
        .iter()
        .map(|&(p_eff, steps)| {
            NoiseModel::from_effective(noise, p_eff, bulk).map(|m| (m, steps, p_eff))
        })
        .collect::<Result<_, _>>()?;
    let widths = vec![config.width; config.hidden_layers];
    let syn_len = lattice.num_generators();

    struct CssHeads {
        x: (Network, AdamState),
        z: (Network, AdamState),
        x_inputs: Vec<usize>,
        z_inputs: Vec<usize>,
    }
    enum Heads {
        Joint(Box<(Network, AdamState)>),
        Css(Box<CssHeads>),
    }
    let mut heads = match split {
        HeadSplit::Joint => {
            let net = he_init(syn_len, &widths, 4, &mut trial_rng(master_seed, u64::MAX));
            let adam = AdamState::new(&net, config.adam);
            Heads::Joint(Box::new((net, adam)))
        }
        HeadSplit::CssHalves => {
            let (x_inputs, z_inputs) = css_partition(lattice)?;
            let x = he_init(x_inputs.len(), &widths, 2, &mut trial_rng(master_seed, u64::MAX));
            let z = he_init(z_inputs.len(), &widths, 2, &mut trial_rng(master_seed, u64::MAX - 1));
            let xs = AdamState::new(&x, config.adam);
            let zs = AdamState::new(&z, config.adam);
            Heads::Css(Box::new(CssHeads { x: (x, xs), z: (z, zs), x_inputs, z_inputs }))
        }
    };

    let mut log = TrainingLog { warnings, ..TrainingLog::default() };
    let window = config.steps.div_ceil(10);
    let mut win_correct = 0u64;
    let mut win_total = 0u64;
    let mut win_class_counts = [0u64; 4];

    let mut step = 0usize;
    for (model, stage_steps, p_eff) in &stages {
        for _ in 0..*stage_steps {
            let batch = sample_batch(lattice, graph, model, master_seed, step, config.batch_size);
            let (loss, correct) = match &mut heads {
                Heads::Joint(pair) => {
                    let (net, adam) = pair.as_mut();
                    let cache = net.forward_train(&batch.inputs)?;
                    let loss = cross_entropy(&cache.probs, &batch.labels)?;
                    let grads = net.backprop(&cache, &batch.labels)?;
                    net.update_running_stats(&cache, config.bn_momentum);
                    adam.step(net, &grads);
                    let correct = (0..batch.labels.len())
                        .filter(|&i| {
                            let row = cache.probs.row(i);
                            let mut best = 0;
                            for (k, &p) in row.iter().enumerate() {
                                if p > row[best] {
                                    best = k;
                                }
                            }
                            best == batch.labels[i]
                        })
                        .count();
                    (loss, correct)
                }
                Heads::Css(css) => {
                    let CssHeads { x, z, x_inputs, z_inputs } = css.as_mut();
                    let xb = gather_columns(&batch.inputs, x_inputs);
                    let zb = gather_columns(&batch.inputs, z_inputs);
                    let xl: Vec<usize> =
                        batch.labels.iter().map(|&l| (l == 1 || l == 2) as usize).collect();
                    let zl: Vec<usize> =
                        batch.labels.iter().map(|&l| (l == 2 || l == 3) as usize).collect();
                    let xc = x.0.forward_train(&xb)?;
                    let zc = z.0.forward_train(&zb)?;
                    let loss =
                        0.5 * (cross_entropy(&xc.probs, &xl)? + cross_entropy(&zc.probs, &zl)?);
                    let xg = x.0.backprop(&xc, &xl)?;
                    let zg = z.0.backprop(&zc, &zl)?;
                    x.0.update_running_stats(&xc, config.bn_momentum);
                    z.0.update_running_stats(&zc, config.bn_momentum);
                    x.1.step(&mut x.0, &xg);
                    z.1.step(&mut z.0, &zg);
                    let correct = (0..batch.labels.len())
                        .filter(|&i| {
                            let px = xc.probs.row(i)[1] > xc.probs.row(i)[0];
                            let pz = zc.probs.row(i)[1] > zc.probs.row(i)[0];
                            Pauli::from_bits(px, pz) as usize == batch.labels[i]
                        })
                        .count();
                    (loss, correct)
                }
            };
            if !loss.is_finite() {
                return Err(MlpError::Diverged { step, loss });
            }
            step += 1;
            if step.is_multiple_of(100) || step == config.steps {
                let accuracy = correct as f64 / config.batch_size as f64;
                let entry = LogEntry { step, p_eff: *p_eff, loss, accuracy };
                on_log(&entry);
                log.entries.push(entry);
            }
            if step > config.steps - window {
                win_correct += correct as u64;
                win_total += config.batch_size as u64;
                for &l in &batch.labels {
                    win_class_counts[l] += 1;
                }
            }
        }
    }

    log.final_accuracy = win_correct as f64 / win_total as f64;
    log.baseline_accuracy =
        win_class_counts.iter().copied().max().unwrap_or(0) as f64 / win_total as f64;
    log.samples_seen = (config.batch_size * config.steps) as u64;

    let curriculum_str = config
        .curriculum
        .iter()
        .map(|(p, s)| format!("{p}x{s}"))
        .collect::<Vec<_>>()
        .join(",");
    let meta = vec![
        ("noise".to_string(), noise.name().to_string()),
        ("seed".to_string(), master_seed.to_string()),
        ("hidden_layers".to_string(), config.hidden_layers.to_string()),
        ("width".to_string(), config.width.to_string()),
        ("batch_size".to_string(), config.batch_size.to_string()),
        ("steps".to_string(), config.steps.to_string()),
        ("curriculum".to_string(), curriculum_str),
        ("final_accuracy".to_string(), format!("{:.6}", log.final_accuracy)),
    ];
    let mode = match heads {
        Heads::Joint(pair) => ModelMode::Joint(pair.0),
        Heads::Css(css) => ModelMode::Css {
            x_head: css.x.0,
            z_head: css.z.0,
            x_inputs: css.x_inputs,
            z_inputs: css.z_inputs,
        },
    };
    Ok((DecoderModel { mode, fingerprint: lattice.fingerprint(), meta }, log))
}

// ---------------------------------------------------------------------------
// Prediction and the model file format
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8] = b"decolab-model v1\n";

impl DecoderModel {
    /// Predicted logical class and 4-way probability vector for a syndrome.
    /// Ties break toward I, then X, then Y, then Z.
    pub fn predict(&self, syndrome: &[bool]) -> Result<(Pauli, [f64; 4]), MlpError> {
        const CLASSES: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        let probs = match &self.mode {
            ModelMode::Joint(net) => {
                if syndrome.len() != net.input_dim {
                    return Err(MlpError::DimensionMismatch {
                        expected: net.input_dim,
                        got: syndrome.len(),
                    });
                }
                let input: Vec<f64> = syndrome.iter().map(|&b| b as u8 as f64).collect();
                let (_, p) = net.predict(&input)?;
                [p[0], p[1], p[2], p[3]]
            }
            ModelMode::Css { x_head, z_head, x_inputs, z_inputs } => {
                let gather = |cols: &[usize]| -> Result<Vec<f64>, MlpError> {
                    cols.iter()
                        .map(|&c| {
                            syndrome
                                .get(c)
                                .map(|&b| b as u8 as f64)
                                .ok_or(MlpError::DimensionMismatch {
                                    expected: c + 1,
                                    got: syndrome.len(),
                                })
                        })
                        .collect()
                };
                let (_, px) = x_head.predict(&gather(x_inputs)?)?;
                let (_, pz) = z_head.predict(&gather(z_inputs)?)?;
                [
                    px[0] * pz[0], // I
                    px[1] * pz[0], // X
                    px[1] * pz[1], // Y
                    px[0] * pz[1], // Z
                ]
            }
        };
        let mut best = 0;
        for (k, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = k;
            }
        }
        Ok((CLASSES[best], probs))
    }

    /// Serialize: magic line, mode byte, lattice fingerprint, the network(s)
    /// as dimensions plus little-endian f64 parameter blocks (weights, bias,
    /// scale, shift, running mean, running variance per layer, then the
    /// head), and a key-value metadata trailer.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<(), MlpError> {
        w.write_all(MODEL_MAGIC)?;
        let (tag, nets): (u8, Vec<&Network>) = match &self.mode {
            ModelMode::Joint(n) => (1, vec![n]),
            ModelMode::Css { x_head, z_head, .. } => (2, vec![x_head, z_head]),
        };
        w.write_all(&[tag])?;
        w.write_all(&self.fingerprint.to_le_bytes())?;
        if let ModelMode::Css { x_inputs, z_inputs, .. } = &self.mode {
            for list in [x_inputs, z_inputs] {
                w.write_all(&(list.len() as u32).to_le_bytes())?;
                for &i in list {
                    w.write_all(&(i as u32).to_le_bytes())?;
                }
            }
        }
        for net in nets {
            w.write_all(&(net.input_dim as u32).to_le_bytes())?;
            w.write_all(&(net.out_dim as u32).to_le_bytes())?;
            w.write_all(&(net.hidden.len() as u32).to_le_bytes())?;
            for l in &net.hidden {
                w.write_all(&(l.width as u32).to_le_bytes())?;
            }
            for l in &net.hidden {
                for block in [&l.weights, &l.bias, &l.gamma, &l.beta, &l.running_mean, &l.running_var]
                {
                    write_f64s(w, block)?;
                }
            }
            write_f64s(w, &net.head_weights)?;
            write_f64s(w, &net.head_bias)?;
        }
        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (k, v) in &self.meta {
            for s in [k, v] {
                w.write_all(&(s.len() as u32).to_le_bytes())?;
                w.write_all(s.as_bytes())?;
            }
        }
        Ok(())
    }

    /// Parse a model file. When `expected_fingerprint` is given, refuse a
    /// model trained against any other lattice.
    pub fn load<R: Read>(r: &mut R, expected_fingerprint: Option<u64>) -> Result<DecoderModel, MlpError> {
        let mut magic = vec![0u8; MODEL_MAGIC.len()];
        r.read_exact(&mut magic).map_err(|_| MlpError::Format("missing header".into()))?;
        if magic != MODEL_MAGIC {
            return Err(MlpError::Format("not a decolab model file".into()));
        }
        let tag = read_u8(r)?;
        let stored = read_u64(r)?;
        if let Some(expected) = expected_fingerprint {
            if stored != expected {
                return Err(MlpError::FingerprintMismatch { stored, expected });
            }
        }
        let mode = match tag {
            1 => ModelMode::Joint(read_network(r)?),
            2 => {
                let x_inputs = read_u32_list(r)?;
                let z_inputs = read_u32_list(r)?;
                let x_head = read_network(r)?;
                let z_head = read_network(r)?;
                ModelMode::Css { x_head, z_head, x_inputs, z_inputs }
            }
            t => return Err(MlpError::Format(format!("unknown mode tag {t}"))),
        };
        let meta_len = read_u32(r)? as usize;
        if meta_len > 10_000 {
            return Err(MlpError::Format("implausible metadata length".into()));
        }
        let mut meta = Vec::with_capacity(meta_len);
        for _ in 0..meta_len {
            let k = read_string(r)?;
            let v = read_string(r)?;
            meta.push((k, v));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(MlpError::Format("trailing bytes after metadata".into()));
        }
        Ok(DecoderModel { mode, fingerprint: stored, meta })
    }
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> std::io::Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8, MlpError> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, MlpError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, MlpError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, MlpError> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn read_u32_list<R: Read>(r: &mut R) -> Result<Vec<usize>, MlpError> {
    let n = read_u32(r)? as usize;
    if n > 1 << 20 {
        return Err(MlpError::Format("implausible list length".into()));
    }
    (0..n).map(|_| read_u32(r).map(|v| v as usize)).collect()
}

fn read_string<R: Read>(r: &mut R) -> Result<String, MlpError> {
    let n = read_u32(r)? as usize;
    if n > 1 << 20 {
        return Err(MlpError::Format("implausible string length".into()));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|_| MlpError::Format("metadata is not UTF-8".into()))
}

fn read_network<R: Read>(r: &mut R) -> Result<Network, MlpError> {
    let input_dim = read_u32(r)? as usize;
    let out_dim = read_u32(r)? as usize;
    let layers = read_u32(r)? as usize;
    if input_dim == 0 || out_dim == 0 || layers > 64 {
        return Err(MlpError::Format("implausible architecture".into()));
    }
    let widths: Vec<usize> =
        (0..layers).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<_, _>>()?;
    if widths.iter().any(|&w| w == 0 || w > 1 << 20) {
        return Err(MlpError::Format("implausible layer width".into()));
    }
    let mut hidden = Vec::with_capacity(layers);
    let mut fan_in = input_dim;
    for &width in &widths {
        hidden.push(HiddenLayer {
            fan_in,
            width,
            weights: read_f64s(r, width * fan_in)?,
            bias: read_f64s(r, width)?,
            gamma: read_f64s(r, width)?,
            beta: read_f64s(r, width)?,
            running_mean: read_f64s(r, width)?,
            running_var: read_f64s(r, width)?,
        });
        fan_in = width;
    }
    Ok(Network {
        input_dim,
        out_dim,
        hidden,
        head_weights: read_f64s(r, out_dim * fan_in)?,
        head_bias: read_f64s(r, out_dim)?,
    })
}

fn truncated(_: std::io::Error) -> MlpError {
    MlpError::Format("unexpected end of file".into())
}
