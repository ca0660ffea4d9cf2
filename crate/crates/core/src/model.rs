//! The embedding network: sigmoid feature-attention gate with residual blend,
//! three dense layers with layer normalization, dropout on the second hidden
//! layer, and a final L2-normalized embedding.
//!
//! Layer norm sits after each linear transform and before its activation for
//! the two hidden layers; the output layer is L2-normalized instead. Training
//! encodes two views per batch ([`forward_pair`]); by default the attention
//! weights are computed once from the anchor view and applied to both views.

#![allow(clippy::needless_range_loop)]

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{
    self, DenseGrad, DenseLayer, DropoutMask, LayerNorm, LayerNormGrad, LayerNormTrace, Matrix,
};
use crate::rng;

/// Layer widths of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub attention_hidden: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub embedding: usize,
}

impl ModelDims {
    /// Default widths (64-dim attention, 256/128 encoder, 128-dim embedding)
    /// for a given input dimension.
    pub fn for_input(input: usize) -> Self {
        Self { input, attention_hidden: 64, hidden1: 256, hidden2: 128, embedding: 128 }
    }
}

/// Two-layer feature attention: `alpha = sigmoid(W2 relu(W1 x + b1) + b2)`,
/// blended as `x_att = x * alpha + residual_beta * x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub layer1: DenseLayer,
    pub layer2: DenseLayer,
    pub residual_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub layer1: DenseLayer,
    pub norm1: LayerNorm,
    pub layer2: DenseLayer,
    pub norm2: LayerNorm,
    pub layer3: DenseLayer,
    /// Dropout probability on the second hidden layer (train mode only).
    pub dropout_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `None` disables the attention gate (the ablated configuration).
    pub attention: Option<AttentionParams>,
    pub encoder: EncoderParams,
}

impl ModelParams {
    pub fn input_dim(&self) -> usize {
        self.encoder.layer1.in_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.layer3.out_dim()
    }

    /// Check internal shape consistency against `dims`.
    pub fn check_dims(&self, dims: &ModelDims) -> Result<()> {
        let enc = &self.encoder;
        let ok = enc.layer1.in_dim() == dims.input
            && enc.layer1.out_dim() == dims.hidden1
            && enc.norm1.dim() == dims.hidden1
            && enc.layer2.in_dim() == dims.hidden1
            && enc.layer2.out_dim() == dims.hidden2
            && enc.norm2.dim() == dims.hidden2
            && enc.layer3.in_dim() == dims.hidden2
            && enc.layer3.out_dim() == dims.embedding
            && match &self.attention {
                Some(att) => {
                    att.layer1.in_dim() == dims.input
                        && att.layer1.out_dim() == dims.attention_hidden
                        && att.layer2.in_dim() == dims.attention_hidden
                        && att.layer2.out_dim() == dims.input
                }
                None => true,
            };
        if ok { Ok(()) } else { Err(Error::Shape("model parameters do not match dims".into())) }
    }

    /// Mutable views of every parameter tensor, in a fixed order shared with
    /// [`ModelGrad::tensors`]. `include_residual` adds the residual blend
    /// scalar (only meaningful when it is trained).
    pub fn tensors_mut(&mut self, include_residual: bool) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if let Some(att) = &mut self.attention {
            out.push(att.layer1.weights.data_mut());
            out.push(&mut att.layer1.bias);
            out.push(att.layer2.weights.data_mut());
            out.push(&mut att.layer2.bias);
            if include_residual {
                out.push(std::slice::from_mut(&mut att.residual_beta));
            }
        }
        let enc = &mut self.encoder;
        out.push(enc.layer1.weights.data_mut());
        out.push(&mut enc.layer1.bias);
        out.push(&mut enc.norm1.gamma);
        out.push(&mut enc.norm1.beta);
        out.push(enc.layer2.weights.data_mut());
        out.push(&mut enc.layer2.bias);
        out.push(&mut enc.norm2.gamma);
        out.push(&mut enc.norm2.beta);
        out.push(enc.layer3.weights.data_mut());
        out.push(&mut enc.layer3.bias);
        out
    }
}

/// Gradients of [`AttentionParams`].
#[derive(Debug, Clone)]
pub struct AttentionGrad {
    pub layer1: DenseGrad,
    pub layer2: DenseGrad,
    pub residual_beta: f64,
}

/// Gradients of [`EncoderParams`].
#[derive(Debug, Clone)]
pub struct EncoderGrad {
    pub layer1: DenseGrad,
    pub norm1: LayerNormGrad,
    pub layer2: DenseGrad,
    pub norm2: LayerNormGrad,
    pub layer3: DenseGrad,
}

impl EncoderGrad {
    fn add_assign(&mut self, other: &EncoderGrad) {
        self.layer1.weights.add_assign(&other.layer1.weights);
        add_vec(&mut self.layer1.bias, &other.layer1.bias);
        add_vec(&mut self.norm1.gamma, &other.norm1.gamma);
        add_vec(&mut self.norm1.beta, &other.norm1.beta);
        self.layer2.weights.add_assign(&other.layer2.weights);
        add_vec(&mut self.layer2.bias, &other.layer2.bias);
        add_vec(&mut self.norm2.gamma, &other.norm2.gamma);
        add_vec(&mut self.norm2.beta, &other.norm2.beta);
        self.layer3.weights.add_assign(&other.layer3.weights);
        add_vec(&mut self.layer3.bias, &other.layer3.bias);
    }
}

fn add_vec(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Gradients of [`ModelParams`], mirroring its tensor layout.
#[derive(Debug, Clone)]
pub struct ModelGrad {
    pub attention: Option<AttentionGrad>,
    pub encoder: EncoderGrad,
}

impl ModelGrad {
    pub fn tensors(&self, include_residual: bool) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        if let Some(att) = &self.attention {
            out.push(att.layer1.weights.data());
            out.push(&att.layer1.bias);
            out.push(att.layer2.weights.data());
            out.push(&att.layer2.bias);
            if include_residual {
                out.push(std::slice::from_ref(&att.residual_beta));
            }
        }
        let enc = &self.encoder;
        out.push(enc.layer1.weights.data());
        out.push(&enc.layer1.bias);
        out.push(&enc.norm1.gamma);
        out.push(&enc.norm1.beta);
        out.push(enc.layer2.weights.data());
        out.push(&enc.layer2.bias);
        out.push(&enc.norm2.gamma);
        out.push(&enc.norm2.beta);
        out.push(enc.layer3.weights.data());
        out.push(&enc.layer3.bias);
        out
    }
}

/// Initialize parameters: variance-preserving fan-in scaling
/// (`std = sqrt(2 / fan_in)`) for every weight matrix, zero biases,
/// identity layer norms, residual blend set to `residual_beta`.
pub fn init_params(
    dims: &ModelDims,
    dropout_p: f64,
    residual_beta: f64,
    attention_enabled: bool,
    seed: u64,
) -> ModelParams {
    let mut r = rng::derive(seed, &[rng::stream::INIT]);
    let mut he = |out: usize, inp: usize| -> DenseLayer {
        let std = (2.0 / inp as f64).sqrt();
        let weights = Matrix::from_fn(out, inp, |_, _| std * rng::standard_normal(&mut r));
        DenseLayer { weights, bias: vec![0.0; out] }
    };
    let attention = attention_enabled.then(|| AttentionParams {
        layer1: he(dims.attention_hidden, dims.input),
        layer2: he(dims.input, dims.attention_hidden),
        residual_beta,
    });
    let encoder = EncoderParams {
        layer1: he(dims.hidden1, dims.input),
        norm1: LayerNorm::identity(dims.hidden1),
        layer2: he(dims.hidden2, dims.hidden1),
        norm2: LayerNorm::identity(dims.hidden2),
        layer3: he(dims.embedding, dims.hidden2),
        dropout_p,
    };
    ModelParams { attention, encoder }
}

/// Cached attention forward-pass state.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    hidden_pre: Matrix,
    hidden: Matrix,
    alpha: Matrix,
}

fn attention_with_trace(x: &Matrix, att: &AttentionParams) -> Result<(Matrix, AttentionTrace)> {
    let hidden_pre = att.layer1.forward(x)?;
    let hidden = neural::relu(&hidden_pre);
    let alpha = neural::sigmoid(&att.layer2.forward(&hidden)?);
    Ok((alpha.clone(), AttentionTrace { hidden_pre, hidden, alpha }))
}

fn blend(x: &Matrix, alpha: &Matrix, residual_beta: f64) -> Matrix {
    let mut out = x.hadamard(alpha);
    for (o, &xv) in out.data_mut().iter_mut().zip(x.data()) {
        *o += residual_beta * xv;
    }
    out
}

/// Attention gate and residual blend: returns the per-feature weights
/// `alpha` in `[0,1]` and the attended features `x * alpha + beta * x`.
pub fn attention_forward(x: &Matrix, att: &AttentionParams) -> Result<(Matrix, Matrix)> {
    let (alpha, _) = attention_with_trace(x, att)?;
    let x_att = blend(x, &alpha, att.residual_beta);
    Ok((alpha, x_att))
}

/// Backward through the attention MLP given the gradient w.r.t. `alpha`.
/// Returns the gradient w.r.t. the MLP input and the parameter gradients
/// (with `residual_beta` left at zero for the caller to fill).
fn attention_mlp_backward(
    x: &Matrix,
    trace: &AttentionTrace,
    grad_alpha: &Matrix,
    att: &AttentionParams,
) -> (Matrix, AttentionGrad) {
    let grad_s = neural::sigmoid_backward(&trace.alpha, grad_alpha);
    let (grad_hidden, g2) = att.layer2.backward(&trace.hidden, &grad_s);
    let grad_hidden_pre = neural::relu_backward(&trace.hidden_pre, &grad_hidden);
    let (grad_x, g1) = att.layer1.backward(x, &grad_hidden_pre);
    (grad_x, AttentionGrad { layer1: g1, layer2: g2, residual_beta: 0.0 })
}

/// Cached encoder forward-pass state for one view.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    x_att: Matrix,
    ln1: LayerNormTrace,
    n1: Matrix,
    h1: Matrix,
    ln2: LayerNormTrace,
    n2: Matrix,
    h2: Matrix,
    z: Matrix,
    norms: Vec<f64>,
}

fn encode_with_trace(
    x_att: Matrix,
    enc: &EncoderParams,
    mask: Option<&DropoutMask>,
) -> Result<(Matrix, EncoderTrace)> {
    let a1 = enc.layer1.forward(&x_att)?;
    let (n1, ln1) = enc.norm1.forward(&a1)?;
    let h1 = neural::relu(&n1);
    let a2 = enc.layer2.forward(&h1)?;
    let (n2, ln2) = enc.norm2.forward(&a2)?;
    let r2 = neural::relu(&n2);
    let h2 = match mask {
        Some(m) => neural::apply_dropout(&r2, m),
        None => r2,
    };
    let z_raw = enc.layer3.forward(&h2)?;
    let (z, norms) = neural::l2_normalize(&z_raw)?;
    Ok((z.clone(), EncoderTrace { x_att, ln1, n1, h1, ln2, n2, h2, z, norms }))
}

fn encoder_backward(
    grad_z: &Matrix,
    trace: &EncoderTrace,
    enc: &EncoderParams,
    mask: Option<&DropoutMask>,
) -> (Matrix, EncoderGrad) {
    let grad_zraw = neural::l2_normalize_backward(&trace.z, &trace.norms, grad_z);
    let (grad_h2, g3) = enc.layer3.backward(&trace.h2, &grad_zraw);
    let grad_r2 = match mask {
        Some(m) => neural::dropout_backward(&grad_h2, m),
        None => grad_h2,
    };
    let grad_n2 = neural::relu_backward(&trace.n2, &grad_r2);
    let (grad_a2, gn2) = enc.norm2.backward(&trace.ln2, &grad_n2);
    let (grad_h1, g2) = enc.layer2.backward(&trace.h1, &grad_a2);
    let grad_n1 = neural::relu_backward(&trace.n1, &grad_h1);
    let (grad_a1, gn1) = enc.norm1.backward(&trace.ln1, &grad_n1);
    let (grad_x_att, g1) = enc.layer1.backward(&trace.x_att, &grad_a1);
    (grad_x_att, EncoderGrad { layer1: g1, norm1: gn1, layer2: g2, norm2: gn2, layer3: g3 })
}

/// Deterministic evaluation-mode encoding: attention weights computed from the
/// input itself, no dropout. Every output row has unit norm.
pub fn encode_eval(x: &Matrix, params: &ModelParams) -> Result<Matrix> {
    let x_att = match &params.attention {
        Some(att) => attention_forward(x, att)?.1,
        None => x.clone(),
    };
    Ok(encode_with_trace(x_att, &params.encoder, None)?.0)
}

enum PairAttention {
    Disabled,
    /// One set of attention weights derived from the anchor, applied to both
    /// views.
    Shared(AttentionTrace),
    /// Each view computes its own attention weights.
    PerView(AttentionTrace, AttentionTrace),
}

/// Forward+backward state for a two-view training step.
pub struct PairTrace {
    x_anchor: Matrix,
    x_positive: Matrix,
    attention: PairAttention,
    enc_anchor: EncoderTrace,
    enc_positive: EncoderTrace,
    mask_anchor: Option<DropoutMask>,
    mask_positive: Option<DropoutMask>,
}

/// Encode the anchor and positive views for training, retaining everything the
/// backward pass needs. Dropout masks, when given, are applied independently
/// per view.
pub fn forward_pair(
    x_anchor: &Matrix,
    x_positive: &Matrix,
    params: &ModelParams,
    mask_anchor: Option<DropoutMask>,
    mask_positive: Option<DropoutMask>,
    share_attention: bool,
) -> Result<(Matrix, Matrix, PairTrace)> {
    let (att_a, att_p, attention) = match &params.attention {
        None => (x_anchor.clone(), x_positive.clone(), PairAttention::Disabled),
        Some(att) if share_attention => {
            let (alpha, trace) = attention_with_trace(x_anchor, att)?;
            let a = blend(x_anchor, &alpha, att.residual_beta);
            let p = blend(x_positive, &alpha, att.residual_beta);
            (a, p, PairAttention::Shared(trace))
        }
        Some(att) => {
            let (alpha_a, tr_a) = attention_with_trace(x_anchor, att)?;
            let (alpha_p, tr_p) = attention_with_trace(x_positive, att)?;
            let a = blend(x_anchor, &alpha_a, att.residual_beta);
            let p = blend(x_positive, &alpha_p, att.residual_beta);
            (a, p, PairAttention::PerView(tr_a, tr_p))
        }
    };
    let (z_a, enc_anchor) = encode_with_trace(att_a, &params.encoder, mask_anchor.as_ref())?;
    let (z_p, enc_positive) = encode_with_trace(att_p, &params.encoder, mask_positive.as_ref())?;
    Ok((
        z_a,
        z_p,
        PairTrace {
            x_anchor: x_anchor.clone(),
            x_positive: x_positive.clone(),
            attention,
            enc_anchor,
            enc_positive,
            mask_anchor,
            mask_positive,
        },
    ))
}

/// Backpropagate embedding gradients for both views into parameter gradients.
/// Also returns the gradients w.r.t. the two input views.
pub fn backward_pair(
    grad_z_anchor: &Matrix,
    grad_z_positive: &Matrix,
    trace: &PairTrace,
    params: &ModelParams,
) -> (ModelGrad, Matrix, Matrix) {
    let enc = &params.encoder;
    let (gx_att_a, eg_a) =
        encoder_backward(grad_z_anchor, &trace.enc_anchor, enc, trace.mask_anchor.as_ref());
    let (gx_att_p, eg_p) =
        encoder_backward(grad_z_positive, &trace.enc_positive, enc, trace.mask_positive.as_ref());
    let mut encoder_grad = eg_a;
    encoder_grad.add_assign(&eg_p);

    match (&params.attention, &trace.attention) {
        (None, PairAttention::Disabled) => {
            (ModelGrad { attention: None, encoder: encoder_grad }, gx_att_a, gx_att_p)
        }
        (Some(att), PairAttention::Shared(atr)) => {
            // x_att_v = x_v * alpha + beta * x_v, alpha from the anchor only.
            let prod_a = gx_att_a.hadamard(&trace.x_anchor);
            let prod_p = gx_att_p.hadamard(&trace.x_positive);
            let mut grad_alpha = prod_a.clone();
            grad_alpha.add_assign(&prod_p);
            let grad_beta = prod_a.data().iter().sum::<f64>() + prod_p.data().iter().sum::<f64>();

            let direct = |g: &Matrix, alpha: &Matrix| {
                let mut out = g.hadamard(alpha);
                for (o, gv) in out.data_mut().iter_mut().zip(g.data()) {
                    *o += att.residual_beta * gv;
                }
                out
            };
            let mut grad_x_a = direct(&gx_att_a, &atr.alpha);
            let grad_x_p = direct(&gx_att_p, &atr.alpha);

            let (gx_mlp, mut att_grad) =
                attention_mlp_backward(&trace.x_anchor, atr, &grad_alpha, att);
            grad_x_a.add_assign(&gx_mlp);
            att_grad.residual_beta = grad_beta;
            (ModelGrad { attention: Some(att_grad), encoder: encoder_grad }, grad_x_a, grad_x_p)
        }
        (Some(att), PairAttention::PerView(tr_a, tr_p)) => {
            let mut total: Option<AttentionGrad> = None;
            let mut grad_beta = 0.0;
            let mut view = |x: &Matrix, atr: &AttentionTrace, gx_att: &Matrix| -> Matrix {
                let prod = gx_att.hadamard(x);
                grad_beta += prod.data().iter().sum::<f64>();
                let mut grad_x = gx_att.hadamard(&atr.alpha);
                for (o, gv) in grad_x.data_mut().iter_mut().zip(gx_att.data()) {
                    *o += att.residual_beta * gv;
                }
                let (gx_mlp, ag) = attention_mlp_backward(x, atr, &prod, att);
                grad_x.add_assign(&gx_mlp);
                match &mut total {
                    None => total = Some(ag),
                    Some(t) => {
                        t.layer1.weights.add_assign(&ag.layer1.weights);
                        add_vec(&mut t.layer1.bias, &ag.layer1.bias);
                        t.layer2.weights.add_assign(&ag.layer2.weights);
                        add_vec(&mut t.layer2.bias, &ag.layer2.bias);
                    }
                }
                grad_x
            };
            let grad_x_a = view(&trace.x_anchor, tr_a, &gx_att_a);
            let grad_x_p = view(&trace.x_positive, tr_p, &gx_att_p);
            let mut att_grad = total.expect("two views visited");
            att_grad.residual_beta = grad_beta;
            (ModelGrad { attention: Some(att_grad), encoder: encoder_grad }, grad_x_a, grad_x_p)
        }
        _ => unreachable!("attention trace inconsistent with parameters"),
    }
}

/// Sample the two independent per-view dropout masks for a training step, or
/// `None` when dropout-based view generation is disabled.
pub fn sample_view_masks(
    batch_rows: usize,
    enc: &EncoderParams,
    enabled: bool,
    rng: &mut ChaCha8Rng,
) -> (Option<DropoutMask>, Option<DropoutMask>) {
    if !enabled || enc.dropout_p == 0.0 {
        return (None, None);
    }
    let a = neural::sample_dropout_mask(batch_rows, enc.layer2.out_dim(), enc.dropout_p, rng);
    let b = neural::sample_dropout_mask(batch_rows, enc.layer2.out_dim(), enc.dropout_p, rng);
    (Some(a), Some(b))
}
