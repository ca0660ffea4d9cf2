//! Minimal differentiable numerical kernel.
//!
//! Dense layers, ReLU/sigmoid activations, layer normalization, inverted
//! dropout and row-wise L2 normalization, each with a forward pass and an
//! analytic backward pass. Everything is 64-bit, row-major and
//! single-threaded; [`grad_check`] compares any backward pass against central
//! finite differences.

#![allow(clippy::needless_range_loop)]

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `rows x cols` f64 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "ragged matrix: row 0 has {cols} columns, row {i} has {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: n, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "hadamard shape");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.rows).map(|r| m.row(r).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

/// Fully-connected layer `y = x W^T + b` with weights stored `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients of a [`DenseLayer`].
#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(Error::Shape(format!(
                "dense layer: {} output rows vs {} bias entries",
                weights.rows(),
                bias.len()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "dense forward: input has {} columns, layer expects {}",
                x.cols(),
                self.in_dim()
            )));
        }
        let (n, out) = (x.rows(), self.out_dim());
        let mut y = Matrix::zeros(n, out);
        for r in 0..n {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for o in 0..out {
                let wr = self.weights.row(o);
                let mut acc = self.bias[o];
                for i in 0..xr.len() {
                    acc += xr[i] * wr[i];
                }
                yr[o] = acc;
            }
        }
        Ok(y)
    }

    /// Backward pass given the forward input `x` and upstream `grad_out`.
    ///
    /// Returns the gradient w.r.t. `x` and the parameter gradients.
    pub fn backward(&self, x: &Matrix, grad_out: &Matrix) -> (Matrix, DenseGrad) {
        assert_eq!(grad_out.cols(), self.out_dim(), "dense backward: grad shape");
        assert_eq!(grad_out.rows(), x.rows(), "dense backward: batch shape");
        let (n, out, inp) = (x.rows(), self.out_dim(), self.in_dim());

        let mut grad_x = Matrix::zeros(n, inp);
        let mut grad_w = Matrix::zeros(out, inp);
        let mut grad_b = vec![0.0; out];
        for r in 0..n {
            let g = grad_out.row(r);
            let xr = x.row(r);
            let gx = grad_x.row_mut(r);
            for o in 0..out {
                let go = g[o];
                if go == 0.0 {
                    continue;
                }
                grad_b[o] += go;
                let wr = self.weights.row(o);
                let gw = grad_w.row_mut(o);
                for i in 0..inp {
                    gx[i] += go * wr[i];
                    gw[i] += go * xr[i];
                }
            }
        }
        (grad_x, DenseGrad { weights: grad_w, bias: grad_b })
    }
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// ReLU gradient; `input` is the forward-pass input. The subgradient at 0 is 0.
pub fn relu_backward(input: &Matrix, grad_out: &Matrix) -> Matrix {
    assert_eq!((input.rows(), input.cols()), (grad_out.rows(), grad_out.cols()));
    let mut g = grad_out.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(input.data()) {
        if xv <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

/// Numerically stable scalar sigmoid.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(sigmoid_scalar)
}

/// Sigmoid gradient expressed through the forward output `y`: `g * y * (1 - y)`.
pub fn sigmoid_backward(output: &Matrix, grad_out: &Matrix) -> Matrix {
    assert_eq!((output.rows(), output.cols()), (grad_out.rows(), grad_out.cols()));
    let mut g = grad_out.clone();
    for (gv, &yv) in g.data_mut().iter_mut().zip(output.data()) {
        *gv *= yv * (1.0 - yv);
    }
    g
}

/// Per-row layer normalization with learnable scale and shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub epsilon: f64,
}

/// Cached forward-pass quantities needed by [`LayerNorm::backward`].
#[derive(Debug, Clone)]
pub struct LayerNormTrace {
    x_hat: Matrix,
    inv_std: Vec<f64>,
}

/// Parameter gradients of a [`LayerNorm`].
#[derive(Debug, Clone)]
pub struct LayerNormGrad {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LayerNorm {
    pub fn identity(dim: usize) -> Self {
        Self { gamma: vec![1.0; dim], beta: vec![0.0; dim], epsilon: 1e-5 }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Normalize each row to zero mean / unit variance (population variance),
    /// then scale by gamma and shift by beta.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LayerNormTrace)> {
        let d = self.dim();
        if x.cols() != d {
            return Err(Error::Shape(format!(
                "layer norm: input has {} columns, params have {d}",
                x.cols()
            )));
        }
        let n = x.rows();
        let mut y = Matrix::zeros(n, d);
        let mut x_hat = Matrix::zeros(n, d);
        let mut inv_std = vec![0.0; n];
        for r in 0..n {
            let xr = x.row(r);
            let mean = xr.iter().sum::<f64>() / d as f64;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let istd = 1.0 / (var + self.epsilon).sqrt();
            inv_std[r] = istd;
            let xh = x_hat.row_mut(r);
            for c in 0..d {
                xh[c] = (xr[c] - mean) * istd;
            }
            let yr = y.row_mut(r);
            for c in 0..d {
                yr[c] = self.gamma[c] * x_hat.get(r, c) + self.beta[c];
            }
        }
        Ok((y, LayerNormTrace { x_hat, inv_std }))
    }

    pub fn backward(&self, trace: &LayerNormTrace, grad_out: &Matrix) -> (Matrix, LayerNormGrad) {
        let (n, d) = (grad_out.rows(), grad_out.cols());
        assert_eq!(d, self.dim(), "layer norm backward: shape");
        let mut grad_x = Matrix::zeros(n, d);
        let mut g_gamma = vec![0.0; d];
        let mut g_beta = vec![0.0; d];
        for r in 0..n {
            let dy = grad_out.row(r);
            let xh = trace.x_hat.row(r);
            let istd = trace.inv_std[r];
            // dxh = gamma * dy; dx = istd * (dxh - mean(dxh) - xh * mean(dxh * xh))
            let mut sum_dxh = 0.0;
            let mut sum_dxh_xh = 0.0;
            for c in 0..d {
                let dxh = self.gamma[c] * dy[c];
                sum_dxh += dxh;
                sum_dxh_xh += dxh * xh[c];
                g_gamma[c] += dy[c] * xh[c];
                g_beta[c] += dy[c];
            }
            let mean_dxh = sum_dxh / d as f64;
            let mean_dxh_xh = sum_dxh_xh / d as f64;
            let gx = grad_x.row_mut(r);
            for c in 0..d {
                let dxh = self.gamma[c] * dy[c];
                gx[c] = istd * (dxh - mean_dxh - xh[c] * mean_dxh_xh);
            }
        }
        (grad_x, LayerNormGrad { gamma: g_gamma, beta: g_beta })
    }
}

/// Inverted-dropout mask: kept activations are pre-scaled by `1/keep_prob` so
/// the evaluation-mode forward pass needs no rescaling.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    pub keep_prob: f64,
    pub mask: Matrix,
    pub scale: f64,
}

/// Sample a Bernoulli(1 - p_dropout) keep mask.
pub fn sample_dropout_mask(
    rows: usize,
    cols: usize,
    p_dropout: f64,
    rng: &mut ChaCha8Rng,
) -> DropoutMask {
    assert!((0.0..1.0).contains(&p_dropout), "p_dropout must be in [0, 1)");
    let keep_prob = 1.0 - p_dropout;
    let mask = if p_dropout == 0.0 {
        Matrix::from_fn(rows, cols, |_, _| 1.0)
    } else {
        Matrix::from_fn(rows, cols, |_, _| if rng.random_bool(keep_prob) { 1.0 } else { 0.0 })
    };
    DropoutMask { keep_prob, mask, scale: 1.0 / keep_prob }
}

pub fn apply_dropout(x: &Matrix, mask: &DropoutMask) -> Matrix {
    assert_eq!((x.rows(), x.cols()), (mask.mask.rows(), mask.mask.cols()), "dropout shape");
    let mut y = x.hadamard(&mask.mask);
    for v in y.data_mut() {
        *v *= mask.scale;
    }
    y
}

/// Dropout is linear in its input, so the backward pass reuses the mask.
pub fn dropout_backward(grad_out: &Matrix, mask: &DropoutMask) -> Matrix {
    apply_dropout(grad_out, mask)
}

/// Divide each row by its Euclidean norm; returns the normalized matrix and
/// the per-row norms.
pub fn l2_normalize(x: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let (n, d) = (x.rows(), x.cols());
    let mut z = Matrix::zeros(n, d);
    let mut norms = vec![0.0; n];
    for r in 0..n {
        let xr = x.row(r);
        let norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Degenerate(format!("l2 normalize: row {r} has norm {norm}")));
        }
        norms[r] = norm;
        let zr = z.row_mut(r);
        for c in 0..d {
            zr[c] = xr[c] / norm;
        }
    }
    Ok((z, norms))
}

/// Backward through row normalization via the projection Jacobian
/// `(I - z z^T) / ||x||`.
pub fn l2_normalize_backward(z: &Matrix, norms: &[f64], grad_out: &Matrix) -> Matrix {
    let (n, d) = (z.rows(), z.cols());
    assert_eq!((grad_out.rows(), grad_out.cols()), (n, d), "l2 backward: shape");
    let mut grad_x = Matrix::zeros(n, d);
    for r in 0..n {
        let zr = z.row(r);
        let g = grad_out.row(r);
        let dot: f64 = zr.iter().zip(g).map(|(a, b)| a * b).sum();
        let gx = grad_x.row_mut(r);
        for c in 0..d {
            gx[c] = (g[c] - zr[c] * dot) / norms[r];
        }
    }
    grad_x
}

/// Maximum relative error between an analytic gradient and central finite
/// differences of `f` at `point`, with step `h`.
///
/// The relative error floor of 1e-4 in the denominator turns near-zero
/// gradient entries into an absolute comparison, so dead ReLU paths do not
/// report spurious 100% errors.
pub fn grad_check(f: impl Fn(&[f64]) -> f64, point: &[f64], analytic: &[f64], h: f64) -> f64 {
    assert_eq!(point.len(), analytic.len(), "grad check: dimension");
    let mut buf = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..point.len() {
        let orig = buf[i];
        buf[i] = orig + h;
        let fp = f(&buf);
        buf[i] = orig - h;
        let fm = f(&buf);
        buf[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-4);
        worst = worst.max((numeric - analytic[i]).abs() / denom);
    }
    worst
}
