//! Dense `f32` kernels for CRNN inference.
//!
//! Feature maps are `H×W×C` row-major (channel fastest); convolution kernels
//! are `Kh×Kw×C×F`. Every output element is accumulated in a fixed order, so
//! results never depend on thread count.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

fn mismatch(msg: impl Into<String>) -> TensorError {
    TensorError::ShapeMismatch(msg.into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(mismatch(format!(
                "shape {shape:?} holds {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f32) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn dims3(&self, what: &str) -> Result<(usize, usize, usize), TensorError> {
        match self.shape[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(mismatch(format!("{what} must be rank 3, got {:?}", self.shape))),
        }
    }

    fn expect_shape(&self, shape: &[usize], what: &str) -> Result<(), TensorError> {
        if self.shape != shape {
            return Err(mismatch(format!("{what}: expected {shape:?}, got {:?}", self.shape)));
        }
        Ok(())
    }
}

/// 2-D convolution over an `H×W×C` map with a `Kh×Kw×C×F` kernel.
///
/// With `same_pad` the input is zero-padded so the output is
/// `ceil(H/sh)×ceil(W/sw)`, the extra row/column going to the bottom/right
/// when the total padding is odd. Otherwise the convolution is valid-only.
pub fn conv2d(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: (usize, usize),
    same_pad: bool,
) -> Result<Tensor, TensorError> {
    let (h, w, c) = x.dims3("conv2d input")?;
    let (kh, kw, kc, f) = match kernel.shape[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => return Err(mismatch(format!("conv2d kernel must be rank 4, got {:?}", kernel.shape))),
    };
    if kc != c {
        return Err(mismatch(format!("conv2d kernel expects {kc} channels, input has {c}")));
    }
    bias.expect_shape(&[f], "conv2d bias")?;
    let (sh, sw) = stride;
    if sh == 0 || sw == 0 {
        return Err(mismatch("conv2d stride must be positive"));
    }
    let (oh, ow, pad_top, pad_left) = if same_pad {
        let oh = h.div_ceil(sh);
        let ow = w.div_ceil(sw);
        let ph = ((oh - 1) * sh + kh).saturating_sub(h);
        let pw = ((ow - 1) * sw + kw).saturating_sub(w);
        (oh, ow, ph / 2, pw / 2)
    } else {
        if kh > h || kw > w {
            return Err(mismatch(format!("conv2d kernel {kh}x{kw} larger than input {h}x{w}")));
        }
        ((h - kh) / sh + 1, (w - kw) / sw + 1, 0, 0)
    };

    let mut out = vec![0f32; oh * ow * f];
    for oy in 0..oh {
        for ox in 0..ow {
            let acc = &mut out[(oy * ow + ox) * f..(oy * ow + ox + 1) * f];
            acc.copy_from_slice(&bias.data);
            for ky in 0..kh {
                let iy = (oy * sh + ky) as isize - pad_top as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let ix = (ox * sw + kx) as isize - pad_left as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let px = &x.data[(iy as usize * w + ix as usize) * c..][..c];
                    let kbase = (ky * kw + kx) * c * f;
                    for (ci, &v) in px.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let krow = &kernel.data[kbase + ci * f..kbase + (ci + 1) * f];
                        for (a, &k) in acc.iter_mut().zip(krow) {
                            *a += v * k;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, f], out)
}

/// Inference-mode batch normalization over the last axis.
pub fn batchnorm_infer(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mean: &Tensor,
    var: &Tensor,
    eps: f32,
) -> Result<Tensor, TensorError> {
    let f = *x.shape.last().ok_or_else(|| mismatch("batchnorm input is rank 0"))?;
    for (t, name) in [(gamma, "gamma"), (beta, "beta"), (mean, "mean"), (var, "var")] {
        t.expect_shape(&[f], name)?;
    }
    let scale: Vec<f32> = gamma
        .data
        .iter()
        .zip(&var.data)
        .map(|(&g, &v)| g / (v + eps).sqrt())
        .collect();
    let mut out = x.clone();
    for chunk in out.data.chunks_exact_mut(f) {
        for (i, v) in chunk.iter_mut().enumerate() {
            *v = scale[i] * (*v - mean.data[i]) + beta.data[i];
        }
    }
    Ok(out)
}

/// Valid (unpadded) max pooling over an `H×W×C` map.
pub fn maxpool2d(x: &Tensor, window: (usize, usize), stride: (usize, usize)) -> Result<Tensor, TensorError> {
    let (h, w, c) = x.dims3("maxpool input")?;
    let (wh, ww) = window;
    let (sh, sw) = stride;
    if wh == 0 || ww == 0 || sh == 0 || sw == 0 {
        return Err(mismatch("maxpool window and stride must be positive"));
    }
    if wh > h || ww > w {
        return Err(mismatch(format!("maxpool window {wh}x{ww} larger than input {h}x{w}")));
    }
    let (oh, ow) = ((h - wh) / sh + 1, (w - ww) / sw + 1);
    let mut out = vec![f32::NEG_INFINITY; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let dst = &mut out[(oy * ow + ox) * c..][..c];
            for dy in 0..wh {
                for dx in 0..ww {
                    let src = &x.data[((oy * sh + dy) * w + ox * sw + dx) * c..][..c];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = d.max(s);
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, c], out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f32) -> f32 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::Tanh => v.tanh(),
        }
    }
}

#[inline]
fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    let mut out = x.clone();
    activation_in_place(&mut out.data, kind);
    out
}

pub fn activation_in_place(xs: &mut [f32], kind: Activation) {
    for v in xs {
        *v = kind.apply(*v);
    }
}

/// `W x + b` for `W` of shape `M×N`.
pub fn dense(x: &[f32], weight: &Tensor, bias: &Tensor) -> Result<Vec<f32>, TensorError> {
    let (m, n) = match weight.shape[..] {
        [m, n] => (m, n),
        _ => return Err(mismatch(format!("dense weight must be rank 2, got {:?}", weight.shape))),
    };
    if x.len() != n {
        return Err(mismatch(format!("dense expects input of {n}, got {}", x.len())));
    }
    bias.expect_shape(&[m], "dense bias")?;
    Ok(weight
        .data
        .chunks_exact(n)
        .zip(&bias.data)
        .map(|(row, &b)| b + dot(row, x))
        .collect())
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Numerically stable `v - max(v) - ln Σ exp(v - max(v))`.
pub fn log_softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    v.iter().map(|&x| x - max - lse).collect()
}

/// One LSTM gate: input weights `H×I`, recurrent weights `H×H`, bias `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

/// Standard LSTM without peepholes.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input: GateParams,
    pub forget: GateParams,
    pub cell: GateParams,
    pub output: GateParams,
}

impl LstmParams {
    /// `(hidden, input)` sizes after checking every gate agrees.
    pub fn dims(&self) -> Result<(usize, usize), TensorError> {
        let (h, i) = match self.input.w.shape[..] {
            [h, i] => (h, i),
            _ => return Err(mismatch("lstm input weights must be rank 2")),
        };
        for g in self.gates() {
            g.w.expect_shape(&[h, i], "lstm W")?;
            g.u.expect_shape(&[h, h], "lstm U")?;
            g.b.expect_shape(&[h], "lstm b")?;
        }
        Ok((h, i))
    }

    fn gates(&self) -> [&GateParams; 4] {
        [&self.input, &self.forget, &self.cell, &self.output]
    }
}

fn gate_preact(g: &GateParams, x: &[f32], h: &[f32]) -> Vec<f32> {
    let (ni, nh) = (x.len(), h.len());
    g.b.data
        .iter()
        .enumerate()
        .map(|(r, &b)| b + dot(&g.w.data[r * ni..(r + 1) * ni], x) + dot(&g.u.data[r * nh..(r + 1) * nh], h))
        .collect()
}

/// One LSTM step; returns the new `(h, c)`.
pub fn lstm_cell(x: &[f32], h_prev: &[f32], c_prev: &[f32], p: &LstmParams) -> Result<(Vec<f32>, Vec<f32>), TensorError> {
    let (nh, ni) = p.dims()?;
    if x.len() != ni || h_prev.len() != nh || c_prev.len() != nh {
        return Err(mismatch(format!(
            "lstm expects x[{ni}], h[{nh}], c[{nh}]; got x[{}], h[{}], c[{}]",
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    Ok(lstm_step(x, h_prev, c_prev, p))
}

fn lstm_step(x: &[f32], h_prev: &[f32], c_prev: &[f32], p: &LstmParams) -> (Vec<f32>, Vec<f32>) {
    let i = gate_preact(&p.input, x, h_prev);
    let f = gate_preact(&p.forget, x, h_prev);
    let g = gate_preact(&p.cell, x, h_prev);
    let o = gate_preact(&p.output, x, h_prev);
    let mut h = Vec::with_capacity(c_prev.len());
    let mut c = Vec::with_capacity(c_prev.len());
    for k in 0..c_prev.len() {
        let ck = sigmoid(f[k]) * c_prev[k] + sigmoid(i[k]) * g[k].tanh();
        c.push(ck);
        h.push(sigmoid(o[k]) * ck.tanh());
    }
    (h, c)
}

/// Runs `p` over `seq` from zero state and returns the hidden state at each step.
pub fn lstm_sequence(seq: &[Vec<f32>], p: &LstmParams, reverse: bool) -> Result<Vec<Vec<f32>>, TensorError> {
    let (nh, ni) = p.dims()?;
    if let Some(bad) = seq.iter().find(|v| v.len() != ni) {
        return Err(mismatch(format!("lstm expects inputs of {ni}, got {}", bad.len())));
    }
    let mut h = vec![0f32; nh];
    let mut c = vec![0f32; nh];
    let mut out = vec![Vec::new(); seq.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..seq.len()).rev())
    } else {
        Box::new(0..seq.len())
    };
    for t in order {
        let (nh2, nc) = lstm_step(&seq[t], &h, &c, p);
        h = nh2;
        c = nc;
        out[t] = h.clone();
    }
    Ok(out)
}

/// Bidirectional layer: `out[t] = [h_fwd(t), h_bwd(t)]`, the backward pass
/// running over the reversed sequence.
pub fn bilstm_layer(seq: &[Vec<f32>], fwd: &LstmParams, bwd: &LstmParams) -> Result<Vec<Vec<f32>>, TensorError> {
    let f = lstm_sequence(seq, fwd, false)?;
    let b = lstm_sequence(seq, bwd, true)?;
    Ok(f.into_iter()
        .zip(b)
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect())
}
