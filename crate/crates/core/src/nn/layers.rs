//! Layer implementations for the from-scratch CNN engine.
//!
//! Batches are `[B, C, H, W]` tensors. Each layer caches what its backward
//! pass needs during a training-mode forward; evaluation-mode forwards cache
//! nothing. Parallel sections split over disjoint output regions and reduce
//! in a fixed order, so results do not depend on worker count.

use crate::numerics::Tensor;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("layer {layer}: expected input shape {expected}, got {got:?}")]
    ShapeMismatch {
        layer: usize,
        expected: String,
        got: Vec<usize>,
    },
    #[error("backward called without a cached forward pass")]
    MissingCache,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("optimizer diverged at epoch {epoch}, step {step}: {source}")]
    TrainDivergence {
        epoch: usize,
        step: usize,
        source: crate::optim::OptimError,
    },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    ConvSim(#[from] crate::convsim::ConvSimError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Optim(#[from] crate::optim::OptimError),
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
}

pub type Result<T> = std::result::Result<T, NnError>;

fn shape_err(expected: String, got: &[usize]) -> NnError {
    // Layer index is attached by the model driver.
    NnError::ShapeMismatch {
        layer: usize::MAX,
        expected,
        got: got.to_vec(),
    }
}

fn bchw(t: &Tensor) -> Result<(usize, usize, usize, usize)> {
    match t.shape() {
        [b, c, h, w] => Ok((*b, *c, *h, *w)),
        other => Err(shape_err("[B, C, H, W]".into(), other)),
    }
}

/// 2-d cross-correlation layer with square kernels, stride 1, and symmetric
/// zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub pad: usize,
    pub weight: Tensor,
    pub bias: Vec<f64>,
    pub weight_grad: Tensor,
    pub bias_grad: Vec<f64>,
    cache: Option<Tensor>,
}

impl Conv2d {
    pub fn new(in_c: usize, out_c: usize, k: usize, pad: usize, weight: Tensor, bias: Vec<f64>) -> Self {
        let weight_grad = Tensor::zeros(weight.shape().to_vec()).expect("nonempty weight");
        let bias_grad = vec![0.0; bias.len()];
        Self {
            in_c,
            out_c,
            k,
            pad,
            weight,
            bias,
            weight_grad,
            bias_grad,
            cache: None,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h + 2 * self.pad - self.k + 1, w + 2 * self.pad - self.k + 1)
    }

    fn pad_sample(&self, x: &[f64], h: usize, w: usize, out: &mut [f64]) {
        let (ph, pw) = (h + 2 * self.pad, w + 2 * self.pad);
        debug_assert_eq!(out.len(), self.in_c * ph * pw);
        out.fill(0.0);
        for c in 0..self.in_c {
            for row in 0..h {
                let src = &x[c * h * w + row * w..c * h * w + row * w + w];
                let dst_off = c * ph * pw + (row + self.pad) * pw + self.pad;
                out[dst_off..dst_off + w].copy_from_slice(src);
            }
        }
    }

    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<Tensor> {
        let (b, c, h, w) = bchw(x)?;
        if c != self.in_c {
            return Err(shape_err(format!("[B, {}, H, W]", self.in_c), x.shape()));
        }
        let (oh, ow) = self.out_hw(h, w);
        let (ph, pw) = (h + 2 * self.pad, w + 2 * self.pad);
        let mut out = Tensor::zeros(vec![b, self.out_c, oh, ow])?;
        let sample_in = c * h * w;
        let sample_out = self.out_c * oh * ow;
        let weight = self.weight.data();
        let bias = &self.bias;
        let (k, in_c, out_c) = (self.k, self.in_c, self.out_c);
        let this = &*self;
        // k == 3 takes a single-pass stencil (nine fused multiply-adds per
        // output element over exact-length rows); other sizes fall back to
        // the generic tap loop.
        out.data_mut()
            .par_chunks_mut(sample_out)
            .zip(x.data().par_chunks(sample_in))
            .for_each(|(out_s, x_s)| {
                let mut xpad = vec![0.0; in_c * ph * pw];
                this.pad_sample(x_s, h, w, &mut xpad);
                for oc in 0..out_c {
                    let out_ch = &mut out_s[oc * oh * ow..(oc + 1) * oh * ow];
                    out_ch.fill(bias[oc]);
                    for ic in 0..in_c {
                        let w_base = ((oc * in_c) + ic) * k * k;
                        let x_ch = &xpad[ic * ph * pw..(ic + 1) * ph * pw];
                        if k == 3 {
                            let wv = &weight[w_base..w_base + 9];
                            for r in 0..oh {
                                let x0 = &x_ch[r * pw..r * pw + ow + 2];
                                let x1 = &x_ch[(r + 1) * pw..(r + 1) * pw + ow + 2];
                                let x2 = &x_ch[(r + 2) * pw..(r + 2) * pw + ow + 2];
                                let orow = &mut out_ch[r * ow..(r + 1) * ow];
                                for j in 0..ow {
                                    orow[j] += wv[0] * x0[j]
                                        + wv[1] * x0[j + 1]
                                        + wv[2] * x0[j + 2]
                                        + wv[3] * x1[j]
                                        + wv[4] * x1[j + 1]
                                        + wv[5] * x1[j + 2]
                                        + wv[6] * x2[j]
                                        + wv[7] * x2[j + 1]
                                        + wv[8] * x2[j + 2];
                                }
                            }
                        } else {
                            for kh in 0..k {
                                for kw in 0..k {
                                    let wv = weight[w_base + kh * k + kw];
                                    if wv == 0.0 {
                                        continue;
                                    }
                                    for r in 0..oh {
                                        let xrow =
                                            &x_ch[(r + kh) * pw + kw..(r + kh) * pw + kw + ow];
                                        let orow = &mut out_ch[r * ow..r * ow + ow];
                                        for (o, &xv) in orow.iter_mut().zip(xrow) {
                                            *o += wv * xv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            });
        if training {
            self.cache = Some(x.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.cache.take().ok_or(NnError::MissingCache)?;
        let (b, _, h, w) = bchw(&x)?;
        let (oh, ow) = self.out_hw(h, w);
        if grad_out.shape() != [b, self.out_c, oh, ow] {
            return Err(shape_err(
                format!("[{b}, {}, {oh}, {ow}]", self.out_c),
                grad_out.shape(),
            ));
        }
        let (ph, pw) = (h + 2 * self.pad, w + 2 * self.pad);
        let sample_in = self.in_c * h * w;
        let sample_out = self.out_c * oh * ow;
        let (k, in_c, out_c, pad) = (self.k, self.in_c, self.out_c, self.pad);
        let go = grad_out.data();
        let xd = x.data();
        let this = &*self;

        // Parameter gradients: samples are processed in fixed-size blocks
        // (so each sample is padded exactly once per block) and the
        // per-block partials are reduced in block order, which keeps the
        // result independent of worker count.
        let kk = k * k;
        const SAMPLE_BLOCK: usize = 16;
        const WG_LANES: usize = 40;
        let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..b)
            .collect::<Vec<_>>()
            .par_chunks(SAMPLE_BLOCK)
            .map(|samples| {
                let mut wg = vec![0.0; out_c * in_c * kk];
                let mut bg = vec![0.0; out_c];
                let mut xpad = vec![0.0; in_c * ph * pw];
                for &s in samples {
                    this.pad_sample(&xd[s * sample_in..(s + 1) * sample_in], h, w, &mut xpad);
                    let go_s = &go[s * sample_out..(s + 1) * sample_out];
                    for oc in 0..out_c {
                        let go_ch = &go_s[oc * oh * ow..(oc + 1) * oh * ow];
                        for g in go_ch {
                            bg[oc] += g;
                        }
                        let wrow = &mut wg[oc * in_c * kk..(oc + 1) * in_c * kk];
                        for ic in 0..in_c {
                            let x_ch = &xpad[ic * ph * pw..(ic + 1) * ph * pw];
                            if k == 3 && ow <= WG_LANES {
                                // Per-lane accumulators: pure vector FMAs per
                                // row, one horizontal reduction per channel
                                // pair instead of one per row.
                                let mut acc = [[0.0f64; WG_LANES]; 9];
                                for r in 0..oh {
                                    let grow = &go_ch[r * ow..(r + 1) * ow];
                                    for (t, lanes) in acc.iter_mut().enumerate() {
                                        let (kh, kw) = (t / 3, t % 3);
                                        let xrow =
                                            &x_ch[(r + kh) * pw + kw..(r + kh) * pw + kw + ow];
                                        for ((a, &g), &xv) in
                                            lanes.iter_mut().zip(grow).zip(xrow)
                                        {
                                            *a += g * xv;
                                        }
                                    }
                                }
                                for (t, lanes) in acc.iter().enumerate() {
                                    wrow[ic * kk + t] += lanes.iter().sum::<f64>();
                                }
                            } else {
                                for kh in 0..k {
                                    for kw in 0..k {
                                        let mut acc = 0.0;
                                        for r in 0..oh {
                                            let xrow = &x_ch
                                                [(r + kh) * pw + kw..(r + kh) * pw + kw + ow];
                                            let grow = &go_ch[r * ow..r * ow + ow];
                                            for (&g, &xv) in grow.iter().zip(xrow) {
                                                acc += g * xv;
                                            }
                                        }
                                        wrow[ic * kk + kh * k + kw] += acc;
                                    }
                                }
                            }
                        }
                    }
                }
                (wg, bg)
            })
            .collect();
        let mut wg = vec![0.0; out_c * in_c * kk];
        let mut bg = vec![0.0; out_c];
        for (wpart, bpart) in &blocks {
            for (dst, src) in wg.iter_mut().zip(wpart) {
                *dst += src;
            }
            for (dst, src) in bg.iter_mut().zip(bpart) {
                *dst += src;
            }
        }
        for (dst, src) in self.weight_grad.data_mut().iter_mut().zip(&wg) {
            *dst += src;
        }
        for (dst, src) in self.bias_grad.iter_mut().zip(&bg) {
            *dst += src;
        }

        // Input gradient, one sample per task.
        let weight = self.weight.data();
        let mut grad_in = Tensor::zeros(vec![b, in_c, h, w])?;
        grad_in
            .data_mut()
            .par_chunks_mut(sample_in)
            .zip(go.par_chunks(sample_out))
            .for_each(|(gin_s, go_s)| {
                if k == 3 {
                    // Gather stencil: pad each output-gradient channel with a
                    // k-1 margin, then read reversed taps per input cell.
                    let (gh, gw) = (oh + 4, ow + 4);
                    let mut gop = vec![0.0; gh * gw];
                    for oc in 0..out_c {
                        let go_ch = &go_s[oc * oh * ow..(oc + 1) * oh * ow];
                        for r in 0..oh {
                            gop[(r + 2) * gw + 2..(r + 2) * gw + 2 + ow]
                                .copy_from_slice(&go_ch[r * ow..(r + 1) * ow]);
                        }
                        for ic in 0..in_c {
                            let w_base = ((oc * in_c) + ic) * kk;
                            let wv = &weight[w_base..w_base + 9];
                            let g_ch = &mut gin_s[ic * h * w..(ic + 1) * h * w];
                            for r in 0..h {
                                let g2 = &gop[(r + pad + 2) * gw + pad..(r + pad + 2) * gw + pad + w + 2];
                                let g1 = &gop[(r + pad + 1) * gw + pad..(r + pad + 1) * gw + pad + w + 2];
                                let g0 = &gop[(r + pad) * gw + pad..(r + pad) * gw + pad + w + 2];
                                let grow = &mut g_ch[r * w..(r + 1) * w];
                                for j in 0..w {
                                    grow[j] += wv[0] * g2[j + 2]
                                        + wv[1] * g2[j + 1]
                                        + wv[2] * g2[j]
                                        + wv[3] * g1[j + 2]
                                        + wv[4] * g1[j + 1]
                                        + wv[5] * g1[j]
                                        + wv[6] * g0[j + 2]
                                        + wv[7] * g0[j + 1]
                                        + wv[8] * g0[j];
                                }
                            }
                        }
                    }
                    return;
                }
                let mut gpad = vec![0.0; in_c * ph * pw];
                for oc in 0..out_c {
                    let go_ch = &go_s[oc * oh * ow..(oc + 1) * oh * ow];
                    for ic in 0..in_c {
                        let w_base = ((oc * in_c) + ic) * kk;
                        let g_ch = &mut gpad[ic * ph * pw..(ic + 1) * ph * pw];
                        for kh in 0..k {
                            for kw in 0..k {
                                let wv = weight[w_base + kh * k + kw];
                                if wv == 0.0 {
                                    continue;
                                }
                                for r in 0..oh {
                                    let grow = &go_ch[r * ow..r * ow + ow];
                                    let xrow =
                                        &mut g_ch[(r + kh) * pw + kw..(r + kh) * pw + kw + ow];
                                    for (xg, &g) in xrow.iter_mut().zip(grow) {
                                        *xg += wv * g;
                                    }
                                }
                            }
                        }
                    }
                }
                // Crop the padded gradient back to the input extent.
                for ic in 0..in_c {
                    for row in 0..h {
                        let src = &gpad[ic * ph * pw + (row + pad) * pw + pad
                            ..ic * ph * pw + (row + pad) * pw + pad + w];
                        gin_s[ic * h * w + row * w..ic * h * w + row * w + w]
                            .copy_from_slice(src);
                    }
                }
            });
        Ok(grad_in)
    }
}

/// Per-channel batch normalization over `(B, H, W)` with running statistics
/// for evaluation.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub c: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    pub gamma_grad: Vec<f64>,
    pub beta_grad: Vec<f64>,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    input: Tensor,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            gamma: vec![1.0; c],
            beta: vec![0.0; c],
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            momentum: 0.1,
            eps: 1e-5,
            gamma_grad: vec![0.0; c],
            beta_grad: vec![0.0; c],
            cache: None,
        }
    }

    fn channel_elems<'a>(
        data: &'a [f64],
        b: usize,
        c_total: usize,
        hw: usize,
        ch: usize,
    ) -> impl Iterator<Item = f64> + 'a {
        (0..b).flat_map(move |s| {
            data[(s * c_total + ch) * hw..(s * c_total + ch + 1) * hw]
                .iter()
                .copied()
        })
    }

    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<Tensor> {
        let (b, c, h, w) = bchw(x)?;
        if c != self.c {
            return Err(shape_err(format!("[B, {}, H, W]", self.c), x.shape()));
        }
        let hw = h * w;
        let m = (b * hw) as f64;
        let mut out = Tensor::zeros(x.shape().to_vec())?;

        let (mean, var): (Vec<f64>, Vec<f64>) = if training {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ch in 0..c {
                let mut sum = 0.0;
                for v in Self::channel_elems(x.data(), b, c, hw, ch) {
                    sum += v;
                }
                let mu = sum / m;
                let mut ss = 0.0;
                for v in Self::channel_elems(x.data(), b, c, hw, ch) {
                    ss += (v - mu) * (v - mu);
                }
                mean[ch] = mu;
                var[ch] = ss / m;
            }
            // Running averages track the batch statistics; the variance uses
            // the unbiased estimate.
            let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
            for ch in 0..c {
                self.running_mean[ch] =
                    (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean[ch];
                self.running_var[ch] = (1.0 - self.momentum) * self.running_var[ch]
                    + self.momentum * var[ch] * unbias;
            }
            (mean, var)
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };

        {
            let od = out.data_mut();
            let xd = x.data();
            for s in 0..b {
                for ch in 0..c {
                    let inv_std = 1.0 / (var[ch] + self.eps).sqrt();
                    let (g, bt, mu) = (self.gamma[ch], self.beta[ch], mean[ch]);
                    let base = (s * c + ch) * hw;
                    for i in base..base + hw {
                        od[i] = g * (xd[i] - mu) * inv_std + bt;
                    }
                }
            }
        }
        if training {
            self.cache = Some(BnCache {
                input: x.clone(),
                mean,
                var,
            });
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let BnCache { input, mean, var } = self.cache.take().ok_or(NnError::MissingCache)?;
        let (b, c, h, w) = bchw(&input)?;
        if grad_out.shape() != input.shape() {
            return Err(shape_err(format!("{:?}", input.shape()), grad_out.shape()));
        }
        let hw = h * w;
        let m = (b * hw) as f64;
        let mut grad_in = Tensor::zeros(input.shape().to_vec())?;
        let xd = input.data();
        let god = grad_out.data();
        let gid = grad_in.data_mut();
        for ch in 0..c {
            let inv_std = 1.0 / (var[ch] + self.eps).sqrt();
            let mu = mean[ch];
            let mut sum_go = 0.0;
            let mut sum_go_xhat = 0.0;
            for s in 0..b {
                let base = (s * c + ch) * hw;
                for i in base..base + hw {
                    let xhat = (xd[i] - mu) * inv_std;
                    sum_go += god[i];
                    sum_go_xhat += god[i] * xhat;
                }
            }
            self.beta_grad[ch] += sum_go;
            self.gamma_grad[ch] += sum_go_xhat;
            let g = self.gamma[ch];
            let mean_go = sum_go / m;
            let mean_go_xhat = sum_go_xhat / m;
            for s in 0..b {
                let base = (s * c + ch) * hw;
                for i in base..base + hw {
                    let xhat = (xd[i] - mu) * inv_std;
                    gid[i] = g * inv_std * (god[i] - mean_go - xhat * mean_go_xhat);
                }
            }
        }
        Ok(grad_in)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeakyRelu {
    pub slope: f64,
    #[serde(skip)]
    cache: Option<Tensor>,
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        Self { slope, cache: None }
    }

    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<Tensor> {
        let slope = self.slope;
        let data = x.iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect();
        if training {
            self.cache = Some(x.clone());
        }
        Ok(Tensor::new(x.shape().to_vec(), data)?)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.cache.take().ok_or(NnError::MissingCache)?;
        if grad_out.shape() != x.shape() {
            return Err(shape_err(format!("{:?}", x.shape()), grad_out.shape()));
        }
        let slope = self.slope;
        let data = x
            .iter()
            .zip(grad_out.iter())
            .map(|(&v, &g)| if v > 0.0 { g } else { slope * g })
            .collect();
        Ok(Tensor::new(x.shape().to_vec(), data)?)
    }
}

/// Max pooling with window `k` and the given stride; odd trailing rows and
/// columns are dropped (floor semantics).
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub k: usize,
    pub stride: usize,
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    in_shape: Vec<usize>,
    argmax: Vec<u32>,
}

impl MaxPool2d {
    pub fn new(k: usize, stride: usize) -> Self {
        Self {
            k,
            stride,
            cache: None,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - self.k) / self.stride + 1, (w - self.k) / self.stride + 1)
    }

    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<Tensor> {
        let (b, c, h, w) = bchw(x)?;
        if h < self.k || w < self.k {
            return Err(shape_err(
                format!("[B, C, >={k}, >={k}] for window {k}", k = self.k),
                x.shape(),
            ));
        }
        let (oh, ow) = self.out_hw(h, w);
        let mut out = Tensor::zeros(vec![b, c, oh, ow])?;
        let mut argmax = vec![0u32; b * c * oh * ow];
        let xd = x.data();
        {
            let od = out.data_mut();
            for bc in 0..b * c {
                let x_ch = &xd[bc * h * w..(bc + 1) * h * w];
                let out_base = bc * oh * ow;
                for r in 0..oh {
                    for col in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_idx = 0usize;
                        for dr in 0..self.k {
                            for dc in 0..self.k {
                                let idx = (r * self.stride + dr) * w + col * self.stride + dc;
                                if x_ch[idx] > best {
                                    best = x_ch[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        od[out_base + r * ow + col] = best;
                        argmax[out_base + r * ow + col] = best_idx as u32;
                    }
                }
            }
        }
        if training {
            self.cache = Some(PoolCache {
                in_shape: x.shape().to_vec(),
                argmax,
            });
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let PoolCache { in_shape, argmax } = self.cache.take().ok_or(NnError::MissingCache)?;
        let (b, c, h, w) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
        let (oh, ow) = self.out_hw(h, w);
        if grad_out.shape() != [b, c, oh, ow] {
            return Err(shape_err(format!("[{b}, {c}, {oh}, {ow}]"), grad_out.shape()));
        }
        let mut grad_in = Tensor::zeros(in_shape.clone())?;
        let gid = grad_in.data_mut();
        for bc in 0..b * c {
            let g_ch = &mut gid[bc * h * w..(bc + 1) * h * w];
            let out_base = bc * oh * ow;
            for i in 0..oh * ow {
                g_ch[argmax[out_base + i] as usize] += grad_out.data()[out_base + i];
            }
        }
        Ok(grad_in)
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub in_f: usize,
    pub out_f: usize,
    pub weight: Tensor, // [out_f, in_f]
    pub bias: Vec<f64>,
    pub weight_grad: Tensor,
    pub bias_grad: Vec<f64>,
    cache: Option<Tensor>,
}

impl Linear {
    pub fn new(in_f: usize, out_f: usize, weight: Tensor, bias: Vec<f64>) -> Self {
        let weight_grad = Tensor::zeros(weight.shape().to_vec()).expect("nonempty");
        let bias_grad = vec![0.0; bias.len()];
        Self {
            in_f,
            out_f,
            weight,
            bias,
            weight_grad,
            bias_grad,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<Tensor> {
        let (b, f) = match x.shape() {
            [b, f] => (*b, *f),
            other => return Err(shape_err("[B, F]".into(), other)),
        };
        if f != self.in_f {
            return Err(shape_err(format!("[B, {}]", self.in_f), x.shape()));
        }
        let mut out = Tensor::zeros(vec![b, self.out_f])?;
        let w = self.weight.data();
        {
            let od = out.data_mut();
            for s in 0..b {
                let xs = &x.data()[s * f..(s + 1) * f];
                let os = &mut od[s * self.out_f..(s + 1) * self.out_f];
                for (o, slot) in os.iter_mut().enumerate() {
                    *slot = self.bias[o] + crate::numerics::dot(&w[o * f..(o + 1) * f], xs);
                }
            }
        }
        if training {
            self.cache = Some(x.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.cache.take().ok_or(NnError::MissingCache)?;
        let b = x.shape()[0];
        let f = self.in_f;
        if grad_out.shape() != [b, self.out_f] {
            return Err(shape_err(format!("[{b}, {}]", self.out_f), grad_out.shape()));
        }
        let god = grad_out.data();
        let xd = x.data();
        {
            let wg = self.weight_grad.data_mut();
            for s in 0..b {
                for o in 0..self.out_f {
                    let g = god[s * self.out_f + o];
                    if g == 0.0 {
                        continue;
                    }
                    self.bias_grad[o] += g;
                    let row = &mut wg[o * f..(o + 1) * f];
                    let xs = &xd[s * f..(s + 1) * f];
                    for (wslot, &xv) in row.iter_mut().zip(xs) {
                        *wslot += g * xv;
                    }
                }
            }
        }
        let mut grad_in = Tensor::zeros(vec![b, f])?;
        let w = self.weight.data();
        {
            let gid = grad_in.data_mut();
            for s in 0..b {
                let gs = &god[s * self.out_f..(s + 1) * self.out_f];
                let gi = &mut gid[s * f..(s + 1) * f];
                for (o, &g) in gs.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    for (slot, &wv) in gi.iter_mut().zip(&w[o * f..(o + 1) * f]) {
                        *slot += g * wv;
                    }
                }
            }
        }
        Ok(grad_in)
    }
}

/// `[B, C, H, W] -> [B, C*H*W]`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    in_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<Tensor> {
        let (b, c, h, w) = bchw(x)?;
        if training {
            self.in_shape = Some(x.shape().to_vec());
        }
        Ok(x.clone().reshape(vec![b, c * h * w])?)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let shape = self.in_shape.take().ok_or(NnError::MissingCache)?;
        Ok(grad_out.clone().reshape(shape)?)
    }
}

/// Mean softmax cross-entropy over a batch of logits.
///
/// Returns the scalar loss and its gradient `(softmax - onehot) / B`.
pub fn cross_entropy(logits: &Tensor, labels: &[u8]) -> Result<(f64, Tensor)> {
    let (b, classes) = match logits.shape() {
        [b, k] => (*b, *k),
        other => return Err(shape_err("[B, K]".into(), other)),
    };
    if labels.len() != b {
        return Err(shape_err(format!("{b} labels"), &[labels.len()]));
    }
    let mut grad = Tensor::zeros(vec![b, classes])?;
    let mut loss = 0.0;
    {
        let gd = grad.data_mut();
        for s in 0..b {
            let label = labels[s] as usize;
            if label >= classes {
                return Err(NnError::LabelOutOfRange {
                    label,
                    classes,
                });
            }
            let row = &logits.data()[s * classes..(s + 1) * classes];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = row.iter().map(|&v| (v - max).exp()).sum();
            let log_sum = max + sum_exp.ln();
            loss += log_sum - row[label];
            let grow = &mut gd[s * classes..(s + 1) * classes];
            for (j, slot) in grow.iter_mut().enumerate() {
                let p = (row[j] - max).exp() / sum_exp;
                *slot = (p - if j == label { 1.0 } else { 0.0 }) / b as f64;
            }
        }
    }
    Ok((loss / b as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_uniform, sample_uniform_from, RngStream};

    #[test]
    fn conv_identity_kernel_passthrough() {
        let x = sample_uniform(RngStream::new(40, 0), -1.0, 1.0, vec![2, 1, 4, 4]).unwrap();
        let weight = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let mut conv = Conv2d::new(1, 1, 1, 0, weight, vec![0.0]);
        let y = conv.forward(&x, false).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_matches_signal_xcorr() {
        // Single-channel conv against the signal module's 2-d correlation.
        let mut rng = RngStream::new(41, 0).rng();
        let x = sample_uniform_from(&mut rng, -1.0, 1.0, vec![1, 1, 6, 5]).unwrap();
        let w = sample_uniform_from(&mut rng, -1.0, 1.0, vec![1, 1, 3, 3]).unwrap();
        let mut conv = Conv2d::new(1, 1, 3, 2, w.clone(), vec![0.0]);
        let y = conv.forward(&x, false).unwrap();

        let img = Tensor::new(vec![6, 5], x.data().to_vec()).unwrap();
        let ker = Tensor::new(vec![3, 3], w.data().to_vec()).unwrap();
        let f = crate::signal::cross_correlate_2d(
            &img,
            &ker,
            (
                crate::signal::PaddingSpec::Explicit(2),
                crate::signal::PaddingSpec::Explicit(2),
            ),
        )
        .unwrap();
        assert_eq!(y.shape(), &[1, 1, 8, 7]);
        for (a, b) in y.data().iter().zip(f.values().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn leaky_relu_definition() {
        let mut lr = LeakyRelu::new(0.2);
        let x = Tensor::new(vec![1, 1, 1, 2], vec![-1.0, 2.0]).unwrap();
        let y = lr.forward(&x, true).unwrap();
        assert_eq!(y.data(), &[-0.2, 2.0]);
        let g = lr
            .backward(&Tensor::new(vec![1, 1, 1, 2], vec![1.0, 1.0]).unwrap())
            .unwrap();
        assert_eq!(g.data(), &[0.2, 1.0]);
    }

    #[test]
    fn maxpool_floor_semantics() {
        let pool = MaxPool2d::new(2, 2);
        assert_eq!(pool.out_hw(34, 34), (17, 17));
        assert_eq!(pool.out_hw(19, 19), (9, 9));
        assert_eq!(pool.out_hw(11, 11), (5, 5));
        assert_eq!(pool.out_hw(7, 7), (3, 3));
    }

    #[test]
    fn maxpool_forward_backward_routing() {
        let x = Tensor::new(
            vec![1, 1, 2, 4],
            vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, 1.0, 6.0],
        )
        .unwrap();
        let mut pool = MaxPool2d::new(2, 2);
        let y = pool.forward(&x, true).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 2]);
        assert_eq!(y.data(), &[5.0, 6.0]);
        let g = pool
            .backward(&Tensor::new(vec![1, 1, 1, 2], vec![10.0, 20.0]).unwrap())
            .unwrap();
        assert_eq!(g.data(), &[0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 20.0]);
    }

    #[test]
    fn batchnorm_normalizes_in_training_mode() {
        let x = sample_uniform(RngStream::new(42, 1), -2.0, 5.0, vec![4, 2, 3, 3]).unwrap();
        let mut bn = BatchNorm2d::new(2);
        let y = bn.forward(&x, true).unwrap();
        // Per channel, the normalized output has mean ~0 and variance ~1.
        for ch in 0..2 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|s| {
                    y.data()[(s * 2 + ch) * 9..(s * 2 + ch + 1) * 9]
                        .iter()
                        .copied()
                        .collect::<Vec<_>>()
                })
                .collect();
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn batchnorm_eval_uses_running_stats() {
        let mut bn = BatchNorm2d::new(1);
        let x = sample_uniform(RngStream::new(43, 0), 0.0, 1.0, vec![8, 1, 2, 2]).unwrap();
        for _ in 0..50 {
            bn.forward(&x, true).unwrap();
        }
        let y_eval = bn.forward(&x, false).unwrap();
        let y_train = bn.forward(&x, true).unwrap();
        // After repeated exposure to the same batch the running stats are
        // close to the batch stats, so the two modes roughly agree.
        for (a, b) in y_eval.data().iter().zip(y_train.data()) {
            assert!((a - b).abs() < 0.1, "{a} vs {b}");
        }
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = Tensor::zeros(vec![3, 10]).unwrap();
        let (loss, grad) = cross_entropy(&logits, &[0, 5, 9]).unwrap();
        assert!((loss - (10.0f64).ln()).abs() < 1e-12);
        // Per-sample gradient rows sum to zero.
        for s in 0..3 {
            let row_sum: f64 = grad.data()[s * 10..(s + 1) * 10].iter().sum();
            assert!(row_sum.abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_confident_correct_is_near_zero() {
        let mut logits = Tensor::zeros(vec![1, 10]).unwrap();
        logits.data_mut()[3] = 100.0;
        let (loss, _) = cross_entropy(&logits, &[3]).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let logits = Tensor::zeros(vec![1, 10]).unwrap();
        assert!(matches!(
            cross_entropy(&logits, &[10]),
            Err(NnError::LabelOutOfRange { .. })
        ));
    }
}
