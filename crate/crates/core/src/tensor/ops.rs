use rayon::prelude::*;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output extent `ceil(in / stride)`; any odd padding cell goes bottom/right.
    Same,
    Valid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub padding: Padding,
    /// `groups == in_channels` makes the convolution depthwise.
    pub groups: usize,
}

impl ConvSpec {
    pub fn new(stride: usize, padding: Padding) -> Self {
        ConvSpec {
            stride,
            padding,
            groups: 1,
        }
    }

    pub fn depthwise(channels: usize, stride: usize, padding: Padding) -> Self {
        ConvSpec {
            stride,
            padding,
            groups: channels,
        }
    }
}

/// Output extent and leading pad for one spatial axis.
fn axis_geometry(
    axis: &str,
    input: usize,
    window: usize,
    stride: usize,
    padding: Padding,
) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::shape("stride", "stride must be at least 1"));
    }
    match padding {
        Padding::Valid => {
            if window > input {
                return Err(Error::shape(
                    axis,
                    format!("window {window} larger than input {input} with valid padding"),
                ));
            }
            Ok(((input - window) / stride + 1, 0))
        }
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + window).saturating_sub(input);
            Ok((out, total / 2))
        }
    }
}

/// 2-D convolution over an H×W×Cin map with a kh×kw×(Cin/groups)×Cout kernel.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    spec: ConvSpec,
) -> Result<Tensor> {
    let (h, w, cin) = input.hwc("input")?;
    let (kh, kw, kcin, cout) = match kernel.dims() {
        &[a, b, c, d] => (a, b, c, d),
        other => {
            return Err(Error::shape(
                "kernel",
                format!("expected rank-4 kh×kw×cin×cout kernel, got {other:?}"),
            ))
        }
    };
    let groups = spec.groups;
    if groups == 0 || cin % groups != 0 {
        return Err(Error::shape(
            "groups",
            format!("{cin} input channels not divisible by {groups} groups"),
        ));
    }
    let cin_g = cin / groups;
    if kcin != cin_g {
        return Err(Error::shape(
            "kernel input channels",
            format!("kernel has {kcin}, input provides {cin_g} per group"),
        ));
    }
    if cout % groups != 0 {
        return Err(Error::shape(
            "kernel output channels",
            format!("{cout} not divisible by {groups} groups"),
        ));
    }
    let cout_g = cout / groups;
    if let Some(b) = bias {
        if b.dims() != [cout] {
            return Err(Error::shape(
                "bias",
                format!("expected [{cout}], got {:?}", b.dims()),
            ));
        }
    }
    let (oh, pad_top) = axis_geometry("height", h, kh, spec.stride, spec.padding)?;
    let (ow, pad_left) = axis_geometry("width", w, kw, spec.stride, spec.padding)?;

    let x = input.data();
    let k = kernel.data();
    let stride = spec.stride;
    let mut out = vec![0.0f32; oh * ow * cout];

    out.par_chunks_mut(ow * cout)
        .enumerate()
        .for_each(|(oy, row)| {
            for ox in 0..ow {
                let acc = &mut row[ox * cout..(ox + 1) * cout];
                if let Some(b) = bias {
                    acc.copy_from_slice(b.data());
                }
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad_left as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let px = &x[(iy as usize * w + ix as usize) * cin..][..cin];
                        let taps = &k[(ky * kw + kx) * cin_g * cout..][..cin_g * cout];
                        if groups == 1 {
                            for (ci, &v) in px.iter().enumerate() {
                                if v == 0.0 {
                                    continue;
                                }
                                let krow = &taps[ci * cout..][..cout];
                                for (a, &kv) in acc.iter_mut().zip(krow) {
                                    *a += v * kv;
                                }
                            }
                        } else if cin_g == 1 && cout_g == 1 {
                            for ((a, &v), &kv) in acc.iter_mut().zip(px).zip(taps) {
                                *a += v * kv;
                            }
                        } else {
                            for g in 0..groups {
                                for ci in 0..cin_g {
                                    let v = px[g * cin_g + ci];
                                    let krow = &taps[ci * cout + g * cout_g..][..cout_g];
                                    let a = &mut acc[g * cout_g..][..cout_g];
                                    for (a, &kv) in a.iter_mut().zip(krow) {
                                        *a += v * kv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });

    Tensor::new(vec![oh, ow, cout], out)
}

/// Frozen batch-norm statistics for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub mean: Tensor,
    pub variance: Tensor,
    pub epsilon: f32,
}

impl BatchNormParams {
    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Per-channel `gamma·(x−mean)/sqrt(variance+epsilon) + beta` over the last axis.
pub fn batch_norm_inference(x: &Tensor, params: &BatchNormParams) -> Result<Tensor> {
    let c = *x.dims().last().expect("tensor rank is at least 1");
    for (name, t) in [
        ("gamma", &params.gamma),
        ("beta", &params.beta),
        ("mean", &params.mean),
        ("variance", &params.variance),
    ] {
        if t.dims() != [c] {
            return Err(Error::shape(
                format!("batch norm {name}"),
                format!("expected [{c}] channels, got {:?}", t.dims()),
            ));
        }
    }
    if params.variance.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("batch norm variance must be non-negative".into()));
    }
    let inv_std: Vec<f32> = params
        .variance
        .data()
        .iter()
        .map(|&v| 1.0 / (v + params.epsilon).sqrt())
        .collect();
    let gamma = params.gamma.data();
    let beta = params.beta.data();
    let mean = params.mean.data();
    let mut out = x.data().to_vec();
    for px in out.chunks_exact_mut(c) {
        for (ch, v) in px.iter_mut().enumerate() {
            *v = gamma[ch] * ((*v - mean[ch]) * inv_std[ch]) + beta[ch];
        }
    }
    Tensor::new(x.dims().to_vec(), out)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Elementwise sum of two tensors with identical dims.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.dims() != b.dims() {
        return Err(Error::shape(
            "add",
            format!("operand dims differ: {:?} vs {:?}", a.dims(), b.dims()),
        ));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.dims().to_vec(), data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pool {
    Max {
        window: usize,
        stride: usize,
        padding: Padding,
    },
    /// Collapses H×W×C to a length-C vector of channel means.
    GlobalAvg,
}

pub fn pool2d(x: &Tensor, pool: Pool) -> Result<Tensor> {
    let (h, w, c) = x.hwc("pool input")?;
    let data = x.data();
    match pool {
        Pool::GlobalAvg => {
            let mut sums = vec![0.0f64; c];
            for px in data.chunks_exact(c) {
                for (s, &v) in sums.iter_mut().zip(px) {
                    *s += v as f64;
                }
            }
            let n = (h * w) as f64;
            Tensor::from_vec(sums.into_iter().map(|s| (s / n) as f32).collect())
        }
        Pool::Max {
            window,
            stride,
            padding,
        } => {
            if window == 0 {
                return Err(Error::shape("window", "pool window must be positive"));
            }
            let (oh, pad_top) = axis_geometry("height", h, window, stride, padding)?;
            let (ow, pad_left) = axis_geometry("width", w, window, stride, padding)?;
            let mut out = vec![f32::NEG_INFINITY; oh * ow * c];
            for oy in 0..oh {
                for ox in 0..ow {
                    let dst = &mut out[(oy * ow + ox) * c..][..c];
                    for ky in 0..window {
                        let iy = (oy * stride + ky) as isize - pad_top as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..window {
                            let ix = (ox * stride + kx) as isize - pad_left as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let src = &data[(iy as usize * w + ix as usize) * c..][..c];
                            for (d, &v) in dst.iter_mut().zip(src) {
                                *d = d.max(v);
                            }
                        }
                    }
                }
            }
            Tensor::new(vec![oh, ow, c], out)
        }
    }
}

/// `out[m] = Σ_n x[n]·W[n,m] + b[m]`.
pub fn dense(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let n = x.len();
    if x.rank() != 1 {
        return Err(Error::shape(
            "dense input",
            format!("expected a vector, got {:?}", x.dims()),
        ));
    }
    let m = match weights.dims() {
        &[wn, wm] if wn == n => wm,
        other => {
            return Err(Error::shape(
                "dense weights",
                format!("expected [{n}, M], got {other:?}"),
            ))
        }
    };
    if bias.dims() != [m] {
        return Err(Error::shape(
            "dense bias",
            format!("expected [{m}], got {:?}", bias.dims()),
        ));
    }
    let mut out = bias.data().to_vec();
    for (&xv, row) in x.data().iter().zip(weights.data().chunks_exact(m)) {
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += xv * wv;
        }
    }
    Tensor::from_vec(out)
}

/// Max-shifted softmax over a vector; the normalizer is accumulated in f64.
pub fn softmax(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 1 {
        return Err(Error::shape(
            "softmax input",
            format!("expected a vector, got {:?}", x.dims()),
        ));
    }
    let max = x.data().iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = x
        .data()
        .iter()
        .map(|&v| ((v - max) as f64).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    Tensor::from_vec(exps.into_iter().map(|e| (e / total) as f32).collect())
}
