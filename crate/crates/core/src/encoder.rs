//! Bidirectional transformer encoder with exact analytic gradients.
//!
//! Layout per block: multi-head scaled dot-product self-attention over the
//! unmasked positions, residual add, layer norm, position-wise feed-forward
//! with GELU, residual add, layer norm. Embeddings are the sum of token,
//! position, and segment tables followed by a parameterless layer norm. The
//! pooled representation is a tanh-affine transform of the final `[CLS]`
//! state.
//!
//! Trailing padding is trimmed before any arithmetic: masked positions carry
//! zero attention weight and are excluded from pooling, so dropping them is
//! exact, not an approximation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::math::{dot, layer_norm_core, softmax, Matrix};
use crate::num;
use crate::rng;
use crate::vocab::EncodedPair;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub dropout_rate: f64,
    pub layer_norm_eps: f64,
}

impl EncoderConfig {
    /// The desk-scale default shape used throughout the pipeline.
    pub fn desk_default(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            max_seq_len: 128,
            hidden_dim: 64,
            n_layers: 4,
            n_heads: 4,
            ffn_dim: 256,
            dropout_rate: 0.1,
            layer_norm_eps: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let fail = |reason: String| Err(EncoderError::Config { reason });
        if self.hidden_dim == 0 || self.n_layers == 0 || self.n_heads == 0 || self.ffn_dim == 0 {
            return fail("all dimensions must be at least 1".into());
        }
        if self.vocab_size == 0 || self.max_seq_len == 0 {
            return fail("vocab_size and max_seq_len must be at least 1".into());
        }
        if self.hidden_dim % self.n_heads != 0 {
            return fail(format!(
                "hidden_dim {} not divisible by n_heads {}",
                self.hidden_dim, self.n_heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.layer_norm_eps > 0.0) {
            return fail("layer_norm_eps must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub attn_q_w: Matrix,
    pub attn_q_b: Matrix,
    pub attn_k_w: Matrix,
    pub attn_k_b: Matrix,
    pub attn_v_w: Matrix,
    pub attn_v_b: Matrix,
    pub attn_out_w: Matrix,
    pub attn_out_b: Matrix,
    pub ffn_in_w: Matrix,
    pub ffn_in_b: Matrix,
    pub ffn_out_w: Matrix,
    pub ffn_out_b: Matrix,
    pub ln1_scale: Matrix,
    pub ln1_shift: Matrix,
    pub ln2_scale: Matrix,
    pub ln2_shift: Matrix,
}

/// All trainable tensors of the encoder plus both task heads.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub token_emb: Matrix,
    pub pos_emb: Matrix,
    pub seg_emb: Matrix,
    pub layers: Vec<LayerParams>,
    pub pooler_w: Matrix,
    pub pooler_b: Matrix,
    pub mlm_w: Matrix,
    pub mlm_b: Matrix,
    pub cls_w: Matrix,
    pub cls_b: Matrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncoderError {
    Config { reason: String },
    LayerOutOfRange { requested: usize, available: usize },
    InvalidInput { reason: String },
}

impl fmt::Display for EncoderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderError::Config { reason } => write!(f, "invalid encoder config: {reason}"),
            EncoderError::LayerOutOfRange {
                requested,
                available,
            } => write!(f, "layer {requested} out of range (model has {available})"),
            EncoderError::InvalidInput { reason } => write!(f, "invalid input: {reason}"),
        }
    }
}

impl core::error::Error for EncoderError {}

const INIT_STD: f64 = 0.02;

fn zero_layer(config: &EncoderConfig) -> LayerParams {
    let h = config.hidden_dim;
    let f = config.ffn_dim;
    LayerParams {
        attn_q_w: Matrix::zeros(h, h),
        attn_q_b: Matrix::zeros(1, h),
        attn_k_w: Matrix::zeros(h, h),
        attn_k_b: Matrix::zeros(1, h),
        attn_v_w: Matrix::zeros(h, h),
        attn_v_b: Matrix::zeros(1, h),
        attn_out_w: Matrix::zeros(h, h),
        attn_out_b: Matrix::zeros(1, h),
        ffn_in_w: Matrix::zeros(h, f),
        ffn_in_b: Matrix::zeros(1, f),
        ffn_out_w: Matrix::zeros(f, h),
        ffn_out_b: Matrix::zeros(1, h),
        ln1_scale: Matrix::zeros(1, h),
        ln1_shift: Matrix::zeros(1, h),
        ln2_scale: Matrix::zeros(1, h),
        ln2_shift: Matrix::zeros(1, h),
    }
}

impl EncoderParams {
    /// All-zero tensors with the shapes implied by `config`.
    pub fn zeros_like(config: &EncoderConfig) -> Self {
        let h = config.hidden_dim;
        EncoderParams {
            token_emb: Matrix::zeros(config.vocab_size, h),
            pos_emb: Matrix::zeros(config.max_seq_len, h),
            seg_emb: Matrix::zeros(2, h),
            layers: (0..config.n_layers).map(|_| zero_layer(config)).collect(),
            pooler_w: Matrix::zeros(h, h),
            pooler_b: Matrix::zeros(1, h),
            mlm_w: Matrix::zeros(h, config.vocab_size),
            mlm_b: Matrix::zeros(1, config.vocab_size),
            cls_w: Matrix::zeros(h, 2),
            cls_b: Matrix::zeros(1, 2),
            config: config.clone(),
        }
    }

    /// Named tensors in the fixed enumeration order used by checkpoints,
    /// the optimizer, and the gradient check.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out: Vec<(String, &Matrix)> = vec![
            ("token_embeddings".into(), &self.token_emb),
            ("position_embeddings".into(), &self.pos_emb),
            ("segment_embeddings".into(), &self.seg_emb),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.attn_q_w"), &l.attn_q_w));
            out.push((format!("layer{i}.attn_q_b"), &l.attn_q_b));
            out.push((format!("layer{i}.attn_k_w"), &l.attn_k_w));
            out.push((format!("layer{i}.attn_k_b"), &l.attn_k_b));
            out.push((format!("layer{i}.attn_v_w"), &l.attn_v_w));
            out.push((format!("layer{i}.attn_v_b"), &l.attn_v_b));
            out.push((format!("layer{i}.attn_out_w"), &l.attn_out_w));
            out.push((format!("layer{i}.attn_out_b"), &l.attn_out_b));
            out.push((format!("layer{i}.ffn_in_w"), &l.ffn_in_w));
            out.push((format!("layer{i}.ffn_in_b"), &l.ffn_in_b));
            out.push((format!("layer{i}.ffn_out_w"), &l.ffn_out_w));
            out.push((format!("layer{i}.ffn_out_b"), &l.ffn_out_b));
            out.push((format!("layer{i}.ln1_scale"), &l.ln1_scale));
            out.push((format!("layer{i}.ln1_shift"), &l.ln1_shift));
            out.push((format!("layer{i}.ln2_scale"), &l.ln2_scale));
            out.push((format!("layer{i}.ln2_shift"), &l.ln2_shift));
        }
        out.push(("pooler_w".into(), &self.pooler_w));
        out.push(("pooler_b".into(), &self.pooler_b));
        out.push(("mlm_head_w".into(), &self.mlm_w));
        out.push(("mlm_head_b".into(), &self.mlm_b));
        out.push(("cls_head_w".into(), &self.cls_w));
        out.push(("cls_head_b".into(), &self.cls_b));
        out
    }

    /// Mutable variant of [`EncoderParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out: Vec<(String, &mut Matrix)> = vec![
            ("token_embeddings".into(), &mut self.token_emb),
            ("position_embeddings".into(), &mut self.pos_emb),
            ("segment_embeddings".into(), &mut self.seg_emb),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{i}.attn_q_w"), &mut l.attn_q_w));
            out.push((format!("layer{i}.attn_q_b"), &mut l.attn_q_b));
            out.push((format!("layer{i}.attn_k_w"), &mut l.attn_k_w));
            out.push((format!("layer{i}.attn_k_b"), &mut l.attn_k_b));
            out.push((format!("layer{i}.attn_v_w"), &mut l.attn_v_w));
            out.push((format!("layer{i}.attn_v_b"), &mut l.attn_v_b));
            out.push((format!("layer{i}.attn_out_w"), &mut l.attn_out_w));
            out.push((format!("layer{i}.attn_out_b"), &mut l.attn_out_b));
            out.push((format!("layer{i}.ffn_in_w"), &mut l.ffn_in_w));
            out.push((format!("layer{i}.ffn_in_b"), &mut l.ffn_in_b));
            out.push((format!("layer{i}.ffn_out_w"), &mut l.ffn_out_w));
            out.push((format!("layer{i}.ffn_out_b"), &mut l.ffn_out_b));
            out.push((format!("layer{i}.ln1_scale"), &mut l.ln1_scale));
            out.push((format!("layer{i}.ln1_shift"), &mut l.ln1_shift));
            out.push((format!("layer{i}.ln2_scale"), &mut l.ln2_scale));
            out.push((format!("layer{i}.ln2_shift"), &mut l.ln2_shift));
        }
        out.push(("pooler_w".into(), &mut self.pooler_w));
        out.push(("pooler_b".into(), &mut self.pooler_b));
        out.push(("mlm_head_w".into(), &mut self.mlm_w));
        out.push(("mlm_head_b".into(), &mut self.mlm_b));
        out.push(("cls_head_w".into(), &mut self.cls_w));
        out.push(("cls_head_b".into(), &mut self.cls_b));
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.all_finite())
    }

    /// Keeps the first `keep_layers` blocks; the pooler and both heads are
    /// reattached to the new last layer. The original is untouched.
    pub fn truncate(&self, keep_layers: usize) -> Result<EncoderParams, EncoderError> {
        if keep_layers == 0 || keep_layers > self.layers.len() {
            return Err(EncoderError::LayerOutOfRange {
                requested: keep_layers,
                available: self.layers.len(),
            });
        }
        let mut out = self.clone();
        out.layers.truncate(keep_layers);
        out.config.n_layers = keep_layers;
        Ok(out)
    }
}

/// Fresh parameters: weights and embeddings from a zero-mean normal with
/// standard deviation 0.02, layer-norm scales 1, shifts and biases 0.
pub fn init_params(config: &EncoderConfig, seed: u64) -> Result<EncoderParams, EncoderError> {
    config.validate()?;
    let mut params = EncoderParams::zeros_like(config);
    let mut r = rng::derive(seed, rng::stream::INIT, 0);
    for (name, tensor) in params.tensors_mut() {
        if name.ends_with("ln1_scale") || name.ends_with("ln2_scale") {
            tensor.as_mut_slice().fill(1.0);
        } else if name.ends_with("_b") || name.ends_with("_shift") {
            // biases and shifts stay zero
        } else {
            for x in tensor.as_mut_slice() {
                *x = rng::normal(&mut r, INIT_STD);
            }
        }
    }
    Ok(params)
}

/// Seed for deterministic dropout masks; present only during training.
///
/// Masks depend only on `(seed, lane, site, shape)`, so re-running a forward
/// pass with the same plan reproduces them exactly — which is what makes
/// gradients checkable by finite differences even with dropout active.
/// Distinct lanes give independent masks; the training loop assigns one lane
/// per batch example.
#[derive(Debug, Clone, Copy)]
pub struct DropoutPlan {
    pub seed: u64,
    pub lane: u64,
}

impl DropoutPlan {
    pub fn new(seed: u64) -> Self {
        DropoutPlan { seed, lane: 0 }
    }

    pub fn lane(self, lane: u64) -> Self {
        DropoutPlan { lane, ..self }
    }
}

/// Sites per lane: embedding plus two per layer; 64 leaves headroom.
const DROPOUT_SITES_PER_LANE: u64 = 64;

/// Per-layer intermediate activations retained for the backward pass.
pub(crate) struct LayerCache {
    pub x_in: Matrix,
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    /// Post-softmax attention weights, one `L x L` matrix per head.
    pub attn: Vec<Matrix>,
    pub ctx: Matrix,
    pub attn_drop: Option<Matrix>,
    pub ln1_hat: Matrix,
    pub ln1_inv_std: Vec<f64>,
    pub x_mid: Matrix,
    pub ffn_pre: Matrix,
    pub ffn_act: Matrix,
    pub ffn_drop: Option<Matrix>,
    pub ln2_hat: Matrix,
    pub ln2_inv_std: Vec<f64>,
    pub x_out: Matrix,
}

pub(crate) struct ForwardCache {
    pub active_len: usize,
    pub ids: Vec<u32>,
    pub segments: Vec<u8>,
    pub mask: Vec<u8>,
    pub emb_hat: Matrix,
    pub emb_inv_std: Vec<f64>,
    pub emb_drop: Option<Matrix>,
    pub layers: Vec<LayerCache>,
    pub pooled: Vec<f64>,
}

impl ForwardCache {
    pub fn final_states(&self) -> &Matrix {
        &self.layers.last().expect("at least one active layer").x_out
    }
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, seed: u64, site: u64) -> Matrix {
    let keep = 1.0 - rate;
    let mut r = rng::derive(seed, rng::stream::DROPOUT, site);
    Matrix::from_fn(rows, cols, |_, _| {
        if r.random::<f64>() < rate {
            0.0
        } else {
            1.0 / keep
        }
    })
}

fn apply_dropout(x: &Matrix, mask: &Matrix) -> Matrix {
    let mut out = x.clone();
    for (o, &m) in out.as_mut_slice().iter_mut().zip(mask.as_slice()) {
        *o *= m;
    }
    out
}

fn linear(x: &Matrix, w: &Matrix, b: &Matrix) -> Matrix {
    let mut out = x.matmul(w);
    out.add_row_broadcast(b.row(0));
    out
}

fn validate_input(params: &EncoderParams, input: &EncodedPair) -> Result<usize, EncoderError> {
    let cfg = &params.config;
    let n = input.ids.len();
    if input.segments.len() != n || input.mask.len() != n {
        return Err(EncoderError::InvalidInput {
            reason: "ids, segments, and mask lengths differ".into(),
        });
    }
    if n > cfg.max_seq_len {
        return Err(EncoderError::InvalidInput {
            reason: format!("sequence length {n} exceeds max_seq_len {}", cfg.max_seq_len),
        });
    }
    if let Some(&bad) = input.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(EncoderError::InvalidInput {
            reason: format!("token id {bad} outside vocabulary of {}", cfg.vocab_size),
        });
    }
    if input.segments.iter().any(|&s| s > 1) {
        return Err(EncoderError::InvalidInput {
            reason: "segment ids must be 0 or 1".into(),
        });
    }
    let active = input.active_len();
    if active == 0 || input.mask[0] != 1 {
        return Err(EncoderError::InvalidInput {
            reason: "input must attend at least position 0".into(),
        });
    }
    Ok(active)
}

pub(crate) fn run_forward(
    params: &EncoderParams,
    input: &EncodedPair,
    n_active_layers: usize,
    dropout: Option<&DropoutPlan>,
) -> Result<ForwardCache, EncoderError> {
    let cfg = &params.config;
    if n_active_layers == 0 || n_active_layers > cfg.n_layers {
        return Err(EncoderError::LayerOutOfRange {
            requested: n_active_layers,
            available: cfg.n_layers,
        });
    }
    let active = validate_input(params, input)?;
    let h = cfg.hidden_dim;
    let heads = cfg.n_heads;
    let hd = cfg.head_dim();
    let scale = 1.0 / num::sqrt(hd as f64);
    let rate = cfg.dropout_rate;
    let dropping = dropout.is_some() && rate > 0.0;
    let drop_seed = dropout.map_or(0, |p| p.seed);
    let site_base = dropout.map_or(0, |p| p.lane * DROPOUT_SITES_PER_LANE);
    debug_assert!(2 * cfg.n_layers as u64 + 1 <= DROPOUT_SITES_PER_LANE);

    let ids = &input.ids[..active];
    let segments = &input.segments[..active];
    let mask = &input.mask[..active];

    // Embedding sum + parameterless layer norm.
    let mut emb_hat = Matrix::zeros(active, h);
    let mut emb_inv_std = Vec::with_capacity(active);
    for i in 0..active {
        let tok = params.token_emb.row(ids[i] as usize);
        let pos = params.pos_emb.row(i);
        let seg = params.seg_emb.row(segments[i] as usize);
        let summed: Vec<f64> = (0..h).map(|j| tok[j] + pos[j] + seg[j]).collect();
        let (hat, inv_std) = layer_norm_core(&summed, cfg.layer_norm_eps);
        emb_hat.row_mut(i).copy_from_slice(&hat);
        emb_inv_std.push(inv_std);
    }
    let emb_drop = dropping.then(|| dropout_mask(active, h, rate, drop_seed, site_base));
    let emb_out = match &emb_drop {
        Some(m) => apply_dropout(&emb_hat, m),
        None => emb_hat.clone(),
    };

    let mut layers = Vec::with_capacity(n_active_layers);
    let mut x = emb_out;
    for (li, lp) in params.layers.iter().take(n_active_layers).enumerate() {
        let x_in = x;
        let q = linear(&x_in, &lp.attn_q_w, &lp.attn_q_b);
        let k = linear(&x_in, &lp.attn_k_w, &lp.attn_k_b);
        let v = linear(&x_in, &lp.attn_v_w, &lp.attn_v_b);

        let mut attn = Vec::with_capacity(heads);
        let mut ctx = Matrix::zeros(active, h);
        for head in 0..heads {
            let lo = head * hd;
            let hi = lo + hd;
            let mut weights = Matrix::zeros(active, active);
            for i in 0..active {
                let q_row = &q.row(i)[lo..hi];
                let w_row = weights.row_mut(i);
                let mut max = f64::NEG_INFINITY;
                for j in 0..active {
                    if mask[j] == 1 {
                        let s = dot(q_row, &k.row(j)[lo..hi]) * scale;
                        w_row[j] = s;
                        if s > max {
                            max = s;
                        }
                    }
                }
                let mut sum = 0.0;
                for j in 0..active {
                    if mask[j] == 1 {
                        w_row[j] = num::exp(w_row[j] - max);
                        sum += w_row[j];
                    } else {
                        w_row[j] = 0.0;
                    }
                }
                for w in w_row.iter_mut() {
                    *w /= sum;
                }
            }
            for i in 0..active {
                // ctx[i, lo..hi] = sum_j weights[i, j] * v[j, lo..hi]
                for j in 0..active {
                    let w = weights.get(i, j);
                    if w != 0.0 {
                        let v_row = &v.row(j)[lo..hi];
                        let ctx_row = &mut ctx.row_mut(i)[lo..hi];
                        for (c, &vv) in ctx_row.iter_mut().zip(v_row) {
                            *c += w * vv;
                        }
                    }
                }
            }
            attn.push(weights);
        }

        let attn_proj = linear(&ctx, &lp.attn_out_w, &lp.attn_out_b);
        let attn_drop = dropping.then(|| dropout_mask(active, h, rate, drop_seed, site_base + 1 + 2 * li as u64));
        let attn_res = match &attn_drop {
            Some(m) => apply_dropout(&attn_proj, m),
            None => attn_proj,
        };

        let mut ln1_hat = Matrix::zeros(active, h);
        let mut ln1_inv_std = Vec::with_capacity(active);
        let mut x_mid = Matrix::zeros(active, h);
        for i in 0..active {
            let pre: Vec<f64> = x_in
                .row(i)
                .iter()
                .zip(attn_res.row(i))
                .map(|(a, b)| a + b)
                .collect();
            let (hat, inv_std) = layer_norm_core(&pre, cfg.layer_norm_eps);
            for j in 0..h {
                x_mid.set(i, j, hat[j] * lp.ln1_scale.get(0, j) + lp.ln1_shift.get(0, j));
            }
            ln1_hat.row_mut(i).copy_from_slice(&hat);
            ln1_inv_std.push(inv_std);
        }

        let ffn_pre = linear(&x_mid, &lp.ffn_in_w, &lp.ffn_in_b);
        let mut ffn_act = ffn_pre.clone();
        for v in ffn_act.as_mut_slice() {
            *v = num::gelu(*v);
        }
        let ffn_proj = linear(&ffn_act, &lp.ffn_out_w, &lp.ffn_out_b);
        let ffn_drop = dropping.then(|| dropout_mask(active, h, rate, drop_seed, site_base + 2 + 2 * li as u64));
        let ffn_res = match &ffn_drop {
            Some(m) => apply_dropout(&ffn_proj, m),
            None => ffn_proj,
        };

        let mut ln2_hat = Matrix::zeros(active, h);
        let mut ln2_inv_std = Vec::with_capacity(active);
        let mut x_out = Matrix::zeros(active, h);
        for i in 0..active {
            let pre: Vec<f64> = x_mid
                .row(i)
                .iter()
                .zip(ffn_res.row(i))
                .map(|(a, b)| a + b)
                .collect();
            let (hat, inv_std) = layer_norm_core(&pre, cfg.layer_norm_eps);
            for j in 0..h {
                x_out.set(i, j, hat[j] * lp.ln2_scale.get(0, j) + lp.ln2_shift.get(0, j));
            }
            ln2_hat.row_mut(i).copy_from_slice(&hat);
            ln2_inv_std.push(inv_std);
        }

        x = x_out.clone();
        layers.push(LayerCache {
            x_in,
            q,
            k,
            v,
            attn,
            ctx,
            attn_drop,
            ln1_hat,
            ln1_inv_std,
            x_mid,
            ffn_pre,
            ffn_act,
            ffn_drop,
            ln2_hat,
            ln2_inv_std,
            x_out,
        });
    }

    // Pooler: tanh-affine of the final [CLS] state.
    let cls_state = layers.last().expect("n_active_layers >= 1").x_out.row(0);
    let mut pooled = Vec::with_capacity(h);
    for j in 0..h {
        let mut s = params.pooler_b.get(0, j);
        for (i, &c) in cls_state.iter().enumerate() {
            s += c * params.pooler_w.get(i, j);
        }
        pooled.push(num::tanh(s));
    }

    Ok(ForwardCache {
        active_len: active,
        ids: ids.to_vec(),
        segments: segments.to_vec(),
        mask: mask.to_vec(),
        emb_hat,
        emb_inv_std,
        emb_drop,
        layers,
        pooled,
    })
}

/// Activations retained from a forward pass.
pub struct ForwardTrace {
    /// Hidden states after each active block, `active_len x hidden_dim`.
    pub layer_states: Vec<Matrix>,
    /// Pooled `[CLS]` representation.
    pub pooled: Vec<f64>,
    /// Attention weights per layer and head, when retention was requested.
    pub attention: Option<Vec<Vec<Matrix>>>,
    pub active_len: usize,
    pub mask: Vec<u8>,
}

pub fn forward(
    params: &EncoderParams,
    input: &EncodedPair,
    n_active_layers: usize,
    dropout: Option<&DropoutPlan>,
    keep_attention: bool,
) -> Result<ForwardTrace, EncoderError> {
    let mut cache = run_forward(params, input, n_active_layers, dropout)?;
    let attention = keep_attention.then(|| {
        cache
            .layers
            .iter_mut()
            .map(|l| core::mem::take(&mut l.attn))
            .collect()
    });
    Ok(ForwardTrace {
        layer_states: cache.layers.iter().map(|l| l.x_out.clone()).collect(),
        pooled: cache.pooled,
        attention,
        active_len: cache.active_len,
        mask: cache.mask,
    })
}

pub(crate) fn cls_logits(params: &EncoderParams, pooled: &[f64]) -> [f64; 2] {
    let mut logits = [params.cls_b.get(0, 0), params.cls_b.get(0, 1)];
    for (i, &p) in pooled.iter().enumerate() {
        logits[0] += p * params.cls_w.get(i, 0);
        logits[1] += p * params.cls_w.get(i, 1);
    }
    logits
}

/// Probability that the pair is accepted, plus the thresholded label.
///
/// Class index 1 is "accepted"; the label is true when the accepted-class
/// probability is at least 0.5.
pub fn predict_quality(
    params: &EncoderParams,
    input: &EncodedPair,
    n_active_layers: usize,
) -> Result<(f64, bool), EncoderError> {
    let cache = run_forward(params, input, n_active_layers, None)?;
    let logits = cls_logits(params, &cache.pooled);
    let probs = softmax(&logits);
    Ok((probs[1], probs[1] >= 0.5))
}

/// Pooling strategy for frozen-feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeaturePooling {
    /// Mean of the hidden states over unmasked positions.
    Mean,
    /// The raw `[CLS]` hidden state.
    Cls,
}

/// Fixed-dimension feature vector from the hidden states at `at_layer`
/// (1-based).
pub fn extract_features(
    params: &EncoderParams,
    input: &EncodedPair,
    at_layer: usize,
    pooling: FeaturePooling,
) -> Result<Vec<f64>, EncoderError> {
    if at_layer == 0 || at_layer > params.config.n_layers {
        return Err(EncoderError::LayerOutOfRange {
            requested: at_layer,
            available: params.config.n_layers,
        });
    }
    let cache = run_forward(params, input, at_layer, None)?;
    let states = &cache.layers[at_layer - 1].x_out;
    match pooling {
        FeaturePooling::Cls => Ok(states.row(0).to_vec()),
        FeaturePooling::Mean => {
            let h = params.config.hidden_dim;
            let mut out = vec![0.0; h];
            let mut n = 0.0;
            for i in 0..cache.active_len {
                if cache.mask[i] == 1 {
                    for (o, &s) in out.iter_mut().zip(states.row(i)) {
                        *o += s;
                    }
                    n += 1.0;
                }
            }
            for o in &mut out {
                *o /= n;
            }
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

/// Layer-norm backward for one position. Writes d(input) into `dx`;
/// accumulates scale/shift gradients when the norm is parameterized.
fn layer_norm_backward(
    dy: &[f64],
    hat: &[f64],
    inv_std: f64,
    scale: Option<&[f64]>,
    mut d_scale_shift: Option<(&mut [f64], &mut [f64])>,
    dx: &mut [f64],
) {
    let n = dy.len();
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let mut dhat = vec![0.0; n];
    for j in 0..n {
        let g = scale.map_or(1.0, |s| s[j]);
        dhat[j] = dy[j] * g;
        m1 += dhat[j];
        m2 += dhat[j] * hat[j];
        if let Some((ds, db)) = d_scale_shift.as_mut() {
            ds[j] += dy[j] * hat[j];
            db[j] += dy[j];
        }
    }
    m1 /= n as f64;
    m2 /= n as f64;
    for j in 0..n {
        dx[j] = inv_std * (dhat[j] - m1 - hat[j] * m2);
    }
}

/// Accumulates gradients for a linear layer `y = x W + b` given `dy`.
/// Returns `dx`.
fn linear_backward(
    x: &Matrix,
    w: &Matrix,
    dy: &Matrix,
    dw: &mut Matrix,
    db: &mut Matrix,
    grads_scale: f64,
) -> Matrix {
    let mut dy_scaled = dy.clone();
    if grads_scale != 1.0 {
        dy_scaled.scale(grads_scale);
    }
    dw.axpy(1.0, &x.matmul_at_b(&dy_scaled));
    db.axpy(1.0, &dy_scaled.col_sums());
    dy_scaled.matmul_a_bt(w)
}

/// Backpropagates `d_final` (gradient w.r.t. the last active block's output)
/// and `d_pooled` (gradient w.r.t. the pooled vector) through the encoder,
/// accumulating into `grads`.
pub(crate) fn backward(
    params: &EncoderParams,
    cache: &ForwardCache,
    mut d_final: Matrix,
    d_pooled: &[f64],
    grads: &mut EncoderParams,
) {
    let cfg = &params.config;
    let h = cfg.hidden_dim;
    let heads = cfg.n_heads;
    let hd = cfg.head_dim();
    let scale = 1.0 / num::sqrt(hd as f64);
    let active = cache.active_len;

    // Pooler backward: pooled = tanh(cls W_p + b_p).
    if d_pooled.iter().any(|&d| d != 0.0) {
        let cls_state = cache.final_states().row(0).to_vec();
        let mut d_pre = vec![0.0; h];
        for j in 0..h {
            d_pre[j] = d_pooled[j] * (1.0 - cache.pooled[j] * cache.pooled[j]);
        }
        for i in 0..h {
            let g_row = grads.pooler_w.row_mut(i);
            for j in 0..h {
                g_row[j] += cls_state[i] * d_pre[j];
            }
        }
        for j in 0..h {
            let b = grads.pooler_b.get(0, j) + d_pre[j];
            grads.pooler_b.set(0, j, b);
        }
        let d_cls = d_final.row_mut(0);
        for i in 0..h {
            d_cls[i] += dot(&d_pre, params.pooler_w.row(i));
        }
    }

    // Transformer blocks, last to first.
    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &params.layers[li];
        let gl = li; // index into grads.layers

        // LN2 backward.
        let mut d_res2 = Matrix::zeros(active, h);
        {
            let lg = &mut grads.layers[gl];
            for i in 0..active {
                layer_norm_backward(
                    d_final.row(i),
                    lc.ln2_hat.row(i),
                    lc.ln2_inv_std[i],
                    Some(lp.ln2_scale.row(0)),
                    Some((lg.ln2_scale.row_mut(0), lg.ln2_shift.row_mut(0))),
                    d_res2.row_mut(i),
                );
            }
        }

        // Residual: res2 = x_mid + drop(ffn_proj).
        let mut d_x_mid = d_res2.clone();
        let d_ffn_proj = match &lc.ffn_drop {
            Some(m) => apply_dropout(&d_res2, m),
            None => d_res2,
        };

        // FFN output projection.
        let d_ffn_act = {
            let lg = &mut grads.layers[gl];
            linear_backward(
                &lc.ffn_act,
                &lp.ffn_out_w,
                &d_ffn_proj,
                &mut lg.ffn_out_w,
                &mut lg.ffn_out_b,
                1.0,
            )
        };

        // GELU.
        let mut d_ffn_pre = d_ffn_act;
        for (d, &pre) in d_ffn_pre
            .as_mut_slice()
            .iter_mut()
            .zip(lc.ffn_pre.as_slice())
        {
            *d *= num::gelu_grad(pre);
        }

        // FFN input projection.
        let d_x_mid_ffn = {
            let lg = &mut grads.layers[gl];
            linear_backward(
                &lc.x_mid,
                &lp.ffn_in_w,
                &d_ffn_pre,
                &mut lg.ffn_in_w,
                &mut lg.ffn_in_b,
                1.0,
            )
        };
        d_x_mid.axpy(1.0, &d_x_mid_ffn);

        // LN1 backward.
        let mut d_res1 = Matrix::zeros(active, h);
        {
            let lg = &mut grads.layers[gl];
            for i in 0..active {
                layer_norm_backward(
                    d_x_mid.row(i),
                    lc.ln1_hat.row(i),
                    lc.ln1_inv_std[i],
                    Some(lp.ln1_scale.row(0)),
                    Some((lg.ln1_scale.row_mut(0), lg.ln1_shift.row_mut(0))),
                    d_res1.row_mut(i),
                );
            }
        }

        // Residual: res1 = x_in + drop(attn_proj).
        let mut d_x_in = d_res1.clone();
        let d_attn_proj = match &lc.attn_drop {
            Some(m) => apply_dropout(&d_res1, m),
            None => d_res1,
        };

        // Attention output projection.
        let d_ctx = {
            let lg = &mut grads.layers[gl];
            linear_backward(
                &lc.ctx,
                &lp.attn_out_w,
                &d_attn_proj,
                &mut lg.attn_out_w,
                &mut lg.attn_out_b,
                1.0,
            )
        };

        // Per-head attention backward.
        let mut d_q = Matrix::zeros(active, h);
        let mut d_k = Matrix::zeros(active, h);
        let mut d_v = Matrix::zeros(active, h);
        for head in 0..heads {
            let lo = head * hd;
            let hi = lo + hd;
            let weights = &lc.attn[head];

            // dV and dA.
            let mut d_attn = Matrix::zeros(active, active);
            for i in 0..active {
                let d_ctx_row = &d_ctx.row(i)[lo..hi];
                for j in 0..active {
                    let w = weights.get(i, j);
                    if w != 0.0 {
                        let dv_row = &mut d_v.row_mut(j)[lo..hi];
                        for (dv, &dc) in dv_row.iter_mut().zip(d_ctx_row) {
                            *dv += w * dc;
                        }
                    }
                    d_attn.set(i, j, dot(d_ctx_row, &lc.v.row(j)[lo..hi]));
                }
            }

            // Softmax backward, then scores -> dQ, dK.
            for i in 0..active {
                let w_row = weights.row(i);
                let da_row = d_attn.row(i);
                let mut inner = 0.0;
                for j in 0..active {
                    inner += w_row[j] * da_row[j];
                }
                for j in 0..active {
                    let ds = w_row[j] * (da_row[j] - inner);
                    if ds != 0.0 {
                        let dq_row = &mut d_q.row_mut(i)[lo..hi];
                        let k_row = &lc.k.row(j)[lo..hi];
                        for (dq, &kk) in dq_row.iter_mut().zip(k_row) {
                            *dq += ds * kk * scale;
                        }
                        let dk_row = &mut d_k.row_mut(j)[lo..hi];
                        let q_row = &lc.q.row(i)[lo..hi];
                        for (dk, &qq) in dk_row.iter_mut().zip(q_row) {
                            *dk += ds * qq * scale;
                        }
                    }
                }
            }
        }

        // Q/K/V projections.
        {
            let lg = &mut grads.layers[gl];
            d_x_in.axpy(
                1.0,
                &linear_backward(&lc.x_in, &lp.attn_q_w, &d_q, &mut lg.attn_q_w, &mut lg.attn_q_b, 1.0),
            );
            d_x_in.axpy(
                1.0,
                &linear_backward(&lc.x_in, &lp.attn_k_w, &d_k, &mut lg.attn_k_w, &mut lg.attn_k_b, 1.0),
            );
            d_x_in.axpy(
                1.0,
                &linear_backward(&lc.x_in, &lp.attn_v_w, &d_v, &mut lg.attn_v_w, &mut lg.attn_v_b, 1.0),
            );
        }

        d_final = d_x_in;
    }

    // Embedding dropout, parameterless layer norm, then table scatter.
    let d_emb_out = match &cache.emb_drop {
        Some(m) => apply_dropout(&d_final, m),
        None => d_final,
    };
    let mut d_row = vec![0.0; h];
    for i in 0..active {
        layer_norm_backward(
            d_emb_out.row(i),
            cache.emb_hat.row(i),
            cache.emb_inv_std[i],
            None,
            None,
            &mut d_row,
        );
        let tok = cache.ids[i] as usize;
        for (g, &d) in grads.token_emb.row_mut(tok).iter_mut().zip(&d_row) {
            *g += d;
        }
        for (g, &d) in grads.pos_emb.row_mut(i).iter_mut().zip(&d_row) {
            *g += d;
        }
        let seg = cache.segments[i] as usize;
        for (g, &d) in grads.seg_emb.row_mut(seg).iter_mut().zip(&d_row) {
            *g += d;
        }
    }
}
