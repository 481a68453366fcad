//! Pre-training (masked LM + next-sentence prediction) and fine-tuning.
//!
//! The loop is a single logical writer over the parameters. All randomness —
//! epoch shuffles, masking, negative sampling, dropout — is derived from
//! `(seed, stream, step)` coordinates, so a run resumed from a checkpoint is
//! bit-identical to an uninterrupted one.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{CorpusSplit, QAPair};
use crate::encoder::{
    backward, cls_logits, run_forward, DropoutPlan, EncoderError, EncoderParams,
};
use crate::math::{dot, softmax, Matrix};
use crate::num;
use crate::rng;
use crate::vocab::{
    encode_pair, EncodedPair, VocabError, Vocabulary, CLS_ID, MASK_ID, PAD_ID, RESERVED_LEN,
    SEP_ID,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of eligible positions selected for prediction.
    pub mask_fraction: f64,
    /// Of the selected positions: (replace with `[MASK]`, replace with a
    /// random token, keep unchanged). Must sum to 1.
    pub mask_split: (f64, f64, f64),
    /// Emit a checkpoint every this many optimizer steps (0 = never).
    pub checkpoint_every: u64,
    pub seed: u64,
    pub weight_decay: f64,
    pub max_seq_len: usize,
    /// Stop after this many total steps even if epochs remain; the learning
    /// rate schedule still spans the full epoch horizon, so capped runs can
    /// be resumed seamlessly.
    pub max_steps: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            batch_size: 32,
            epochs: 3,
            mask_fraction: 0.15,
            mask_split: (0.8, 0.1, 0.1),
            checkpoint_every: 1000,
            seed: 0,
            weight_decay: 0.01,
            max_seq_len: 128,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |reason: &str| {
            Err(TrainError::Config {
                reason: reason.to_string(),
            })
        };
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.mask_fraction) {
            return fail("mask_fraction must lie in [0, 1]");
        }
        let (a, b, c) = self.mask_split;
        if a < 0.0 || b < 0.0 || c < 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
            return fail("mask_split fractions must be nonnegative and sum to 1");
        }
        if self.weight_decay < 0.0 {
            return fail("weight_decay must be nonnegative");
        }
        if self.max_seq_len < 5 {
            return fail("max_seq_len must be at least 5");
        }
        Ok(())
    }
}

/// How next-sentence examples are formed during pre-training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PretrainMode {
    /// Consecutive sentences within a record; negatives pair a sentence with
    /// one drawn from a different record.
    Sentence,
    /// Whole question as the first segment, whole answer as the second;
    /// negatives pair the question with another record's answer.
    QaParagraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain(PretrainMode),
    Finetune,
}

impl Phase {
    pub fn objectives(self) -> Objectives {
        match self {
            Phase::Pretrain(_) => Objectives {
                mlm: true,
                nsp: true,
                cls: false,
            },
            Phase::Finetune => Objectives {
                mlm: false,
                nsp: false,
                cls: true,
            },
        }
    }
}

/// Which loss terms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Objectives {
    pub mlm: bool,
    pub nsp: bool,
    pub cls: bool,
}

impl Objectives {
    fn any(&self) -> bool {
        self.mlm || self.nsp || self.cls
    }
}

/// A batch of encoded inputs with masking targets and pairing labels.
#[derive(Debug, Clone)]
pub struct MaskedBatch {
    pub inputs: Vec<EncodedPair>,
    /// Per input, per position: the original id where a prediction is due.
    pub mlm_targets: Vec<Vec<Option<u32>>>,
    /// Per input: true when the second segment genuinely follows the first.
    pub nsp_labels: Vec<bool>,
    /// Id of the record each input came from, for error reporting.
    pub source_ids: Vec<String>,
    /// Records skipped in sentence mode for having fewer than two sentences.
    pub skipped_short: usize,
}

#[derive(Debug)]
pub enum TrainError {
    Config {
        reason: String,
    },
    EmptyData,
    Numeric {
        step: u64,
        example_id: String,
    },
    Checkpoint {
        step: u64,
        reason: String,
        resumable: Box<TrainState>,
    },
    Encoder(EncoderError),
    Vocab(VocabError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Config { reason } => write!(f, "invalid train config: {reason}"),
            TrainError::EmptyData => write!(f, "training data is empty"),
            TrainError::Numeric { step, example_id } => {
                write!(f, "non-finite loss at step {step} on example `{example_id}`")
            }
            TrainError::Checkpoint { step, reason, .. } => {
                write!(f, "checkpoint write failed at step {step}: {reason}")
            }
            TrainError::Encoder(e) => write!(f, "{e}"),
            TrainError::Vocab(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<EncoderError> for TrainError {
    fn from(e: EncoderError) -> Self {
        TrainError::Encoder(e)
    }
}

impl From<VocabError> for TrainError {
    fn from(e: VocabError) -> Self {
        TrainError::Vocab(e)
    }
}

/// Splits on `.`, `?`, or `!` followed by whitespace (or end of text).
/// Fragments without an alphanumeric character are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '?' | '!') {
            let boundary = chars.peek().map_or(true, |n| n.is_whitespace());
            if boundary {
                if current.chars().any(char::is_alphanumeric) {
                    out.push(current.trim().to_string());
                }
                current.clear();
            }
        }
    }
    if current.chars().any(char::is_alphanumeric) {
        out.push(current.trim().to_string());
    }
    out
}

fn apply_masking<R: Rng>(
    input: &mut EncodedPair,
    targets: &mut Vec<Option<u32>>,
    vocab: &Vocabulary,
    config: &TrainConfig,
    rng: &mut R,
) {
    targets.clear();
    targets.resize(input.ids.len(), None);
    let n_regular = vocab.size().saturating_sub(RESERVED_LEN);
    for pos in 0..input.ids.len() {
        if input.mask[pos] != 1 {
            continue;
        }
        let id = input.ids[pos];
        if id == PAD_ID || id == CLS_ID || id == SEP_ID {
            continue;
        }
        if rng.random::<f64>() >= config.mask_fraction {
            continue;
        }
        targets[pos] = Some(id);
        let roll: f64 = rng.random();
        if roll < config.mask_split.0 {
            input.ids[pos] = MASK_ID;
        } else if roll < config.mask_split.0 + config.mask_split.1 && n_regular > 0 {
            input.ids[pos] = (RESERVED_LEN + rng.random_range(0..n_regular)) as u32;
        }
        // otherwise: keep the original token, prediction still due
    }
}

/// Builds a pre-training batch with a generator derived from `config.seed`.
pub fn make_pretrain_batch(
    pairs: &[QAPair],
    vocab: &Vocabulary,
    config: &TrainConfig,
    mode: PretrainMode,
) -> Result<MaskedBatch, TrainError> {
    let mut rng = rng::derive(config.seed, rng::stream::MASK, 0);
    make_pretrain_batch_with(pairs, vocab, config, mode, &mut rng)
}

/// Like [`make_pretrain_batch`] but drawing from a caller-supplied generator
/// (the training loop derives one per step).
pub fn make_pretrain_batch_with<R: Rng>(
    pairs: &[QAPair],
    vocab: &Vocabulary,
    config: &TrainConfig,
    mode: PretrainMode,
    rng: &mut R,
) -> Result<MaskedBatch, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let mut batch = MaskedBatch {
        inputs: Vec::with_capacity(pairs.len()),
        mlm_targets: Vec::with_capacity(pairs.len()),
        nsp_labels: Vec::with_capacity(pairs.len()),
        source_ids: Vec::with_capacity(pairs.len()),
        skipped_short: 0,
    };

    for (idx, pair) in pairs.iter().enumerate() {
        let (first, second, positive) = match mode {
            PretrainMode::Sentence => {
                let doc = format!("{} {}", pair.question, pair.answer);
                let sents = split_sentences(&doc);
                if sents.len() < 2 {
                    batch.skipped_short += 1;
                    continue;
                }
                let positive = pairs.len() < 2 || rng.random::<bool>();
                if positive {
                    let i = rng.random_range(0..sents.len() - 1);
                    (sents[i].clone(), sents[i + 1].clone(), true)
                } else {
                    let i = rng.random_range(0..sents.len());
                    let first = sents[i].clone();
                    let mut second = first.clone();
                    for _ in 0..16 {
                        let other = &pairs[rng.random_range(0..pairs.len())];
                        if other.id == pair.id {
                            continue;
                        }
                        let other_sents =
                            split_sentences(&format!("{} {}", other.question, other.answer));
                        if other_sents.is_empty() {
                            continue;
                        }
                        let cand = other_sents[rng.random_range(0..other_sents.len())].clone();
                        if cand != first {
                            second = cand;
                            break;
                        }
                    }
                    if second == first {
                        // No usable negative; fall back to a positive pair.
                        let i = rng.random_range(0..sents.len() - 1);
                        (sents[i].clone(), sents[i + 1].clone(), true)
                    } else {
                        (first, second, false)
                    }
                }
            }
            PretrainMode::QaParagraph => {
                let positive = pairs.len() < 2 || rng.random::<bool>();
                if positive {
                    (pair.question.clone(), pair.answer.clone(), true)
                } else {
                    let mut answer = pair.answer.clone();
                    for _ in 0..16 {
                        let other = rng.random_range(0..pairs.len());
                        if other != idx && pairs[other].answer != pair.answer {
                            answer = pairs[other].answer.clone();
                            break;
                        }
                    }
                    if answer == pair.answer {
                        (pair.question.clone(), pair.answer.clone(), true)
                    } else {
                        (pair.question.clone(), answer, false)
                    }
                }
            }
        };

        let mut input = encode_pair(&first, &second, vocab, config.max_seq_len)?;
        let mut targets = Vec::new();
        apply_masking(&mut input, &mut targets, vocab, config, rng);
        batch.inputs.push(input);
        batch.mlm_targets.push(targets);
        batch.nsp_labels.push(positive);
        batch.source_ids.push(pair.id.clone());
    }
    Ok(batch)
}

/// Plain labeled encodings for the classification phase; no masking.
pub fn make_finetune_batch(
    pairs: &[QAPair],
    vocab: &Vocabulary,
    max_seq_len: usize,
) -> Result<MaskedBatch, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let mut batch = MaskedBatch {
        inputs: Vec::with_capacity(pairs.len()),
        mlm_targets: Vec::with_capacity(pairs.len()),
        nsp_labels: Vec::new(),
        source_ids: Vec::with_capacity(pairs.len()),
        skipped_short: 0,
    };
    for pair in pairs {
        let mut input = encode_pair(&pair.question, &pair.answer, vocab, max_seq_len)?;
        input.label = Some(pair.accepted);
        batch.mlm_targets.push(vec![None; input.ids.len()]);
        batch.inputs.push(input);
        batch.source_ids.push(pair.id.clone());
    }
    Ok(batch)
}

/// Loss and exact gradients over a batch.
///
/// The loss is the sum of per-objective means: MLM cross-entropy averaged
/// over predicted positions, NSP and CLS cross-entropy averaged over
/// examples. Gradients come back in a parameter-shaped structure.
pub fn loss_and_grads(
    params: &EncoderParams,
    batch: &MaskedBatch,
    objectives: Objectives,
    dropout: Option<&DropoutPlan>,
) -> Result<(f64, EncoderParams), TrainError> {
    if batch.inputs.is_empty() {
        return Err(TrainError::EmptyData);
    }
    if !objectives.any() {
        return Err(TrainError::Config {
            reason: "at least one objective must be active".into(),
        });
    }

    let cfg = &params.config;
    let h = cfg.hidden_dim;
    let n_ex = batch.inputs.len() as f64;
    let n_mlm: usize = if objectives.mlm {
        batch
            .mlm_targets
            .iter()
            .map(|t| t.iter().filter(|x| x.is_some()).count())
            .sum()
    } else {
        0
    };
    let inv_mlm = if n_mlm > 0 { 1.0 / n_mlm as f64 } else { 0.0 };

    let mut grads = EncoderParams::zeros_like(cfg);
    let mut total_loss = 0.0;

    for (e, input) in batch.inputs.iter().enumerate() {
        let plan = dropout.map(|p| p.lane(e as u64));
        let cache = run_forward(params, input, cfg.n_layers, plan.as_ref())?;
        let active = cache.active_len;
        let mut d_final = Matrix::zeros(active, h);
        let mut d_pooled = vec![0.0; h];
        let mut touched = false;
        let mut example_loss = 0.0;

        // NSP and CLS share the pooled classification head; they differ only
        // in where the label comes from.
        let pooled_ce = |label: bool, grads: &mut EncoderParams, d_pooled: &mut [f64]| -> f64 {
            let y = usize::from(label);
            let probs = softmax(&cls_logits(params, &cache.pooled));
            let mut d_logits = [probs[0] / n_ex, probs[1] / n_ex];
            d_logits[y] -= 1.0 / n_ex;
            for i in 0..h {
                let p = cache.pooled[i];
                let w_row = grads.cls_w.row_mut(i);
                w_row[0] += p * d_logits[0];
                w_row[1] += p * d_logits[1];
                d_pooled[i] +=
                    d_logits[0] * params.cls_w.get(i, 0) + d_logits[1] * params.cls_w.get(i, 1);
            }
            let b = grads.cls_b.row_mut(0);
            b[0] += d_logits[0];
            b[1] += d_logits[1];
            -num::ln(probs[y])
        };

        if objectives.cls {
            let label = input.label.ok_or_else(|| TrainError::Config {
                reason: format!(
                    "cls objective requires labeled inputs (example `{}`)",
                    batch.source_ids[e]
                ),
            })?;
            example_loss += pooled_ce(label, &mut grads, &mut d_pooled) / n_ex;
            touched = true;
        }
        if objectives.nsp {
            let label = *batch.nsp_labels.get(e).ok_or_else(|| TrainError::Config {
                reason: "nsp objective requires nsp_labels".into(),
            })?;
            example_loss += pooled_ce(label, &mut grads, &mut d_pooled) / n_ex;
            touched = true;
        }

        if objectives.mlm && n_mlm > 0 {
            let final_states = cache.final_states();
            for (pos, target) in batch.mlm_targets[e].iter().enumerate() {
                let Some(orig) = target else { continue };
                debug_assert!(pos < active);
                let h_state = final_states.row(pos);
                let mut logits = params.mlm_b.row(0).to_vec();
                for (i, &x) in h_state.iter().enumerate() {
                    let w_row = params.mlm_w.row(i);
                    for (l, &w) in logits.iter_mut().zip(w_row) {
                        *l += x * w;
                    }
                }
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + num::ln(logits.iter().map(|&l| num::exp(l - max)).sum::<f64>());
                example_loss += (lse - logits[*orig as usize]) * inv_mlm;

                let mut d_logits: Vec<f64> =
                    logits.iter().map(|&l| num::exp(l - lse) * inv_mlm).collect();
                d_logits[*orig as usize] -= inv_mlm;
                for (i, &x) in h_state.iter().enumerate() {
                    let gw_row = grads.mlm_w.row_mut(i);
                    for (g, &dl) in gw_row.iter_mut().zip(&d_logits) {
                        *g += x * dl;
                    }
                }
                for (g, &dl) in grads.mlm_b.row_mut(0).iter_mut().zip(&d_logits) {
                    *g += dl;
                }
                let d_row = d_final.row_mut(pos);
                for (i, d) in d_row.iter_mut().enumerate() {
                    *d += dot(params.mlm_w.row(i), &d_logits);
                }
            }
            touched = true;
        }

        if !example_loss.is_finite() {
            return Err(TrainError::Numeric {
                step: 0,
                example_id: batch.source_ids[e].clone(),
            });
        }
        total_loss += example_loss;

        if touched {
            backward(params, &cache, d_final, &d_pooled, &mut grads);
        }
    }

    Ok((total_loss, grads))
}

// ---------------------------------------------------------------------------
// Optimizer and loop
// ---------------------------------------------------------------------------

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Fraction of the total schedule spent in linear warmup.
const WARMUP_FRACTION: f64 = 0.1;

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: EncoderParams,
    pub opt_m: EncoderParams,
    pub opt_v: EncoderParams,
    /// Number of optimizer steps taken so far.
    pub step: u64,
}

impl TrainState {
    pub fn fresh(params: EncoderParams) -> Self {
        let config = params.config.clone();
        TrainState {
            params,
            opt_m: EncoderParams::zeros_like(&config),
            opt_v: EncoderParams::zeros_like(&config),
            step: 0,
        }
    }
}

/// Linear warmup over the first tenth of `total`, then linear decay.
pub fn lr_at(step_one_based: u64, total: u64, base: f64) -> f64 {
    let warmup = (total as f64 * WARMUP_FRACTION).max(1.0);
    let t = step_one_based as f64;
    if t <= warmup {
        base * t / warmup
    } else {
        let denom = (total as f64 - warmup + 1.0).max(1.0);
        base * (total as f64 - t + 1.0) / denom
    }
}

/// One decoupled-weight-decay adaptive-moment update. Layer-norm parameters
/// and biases are exempt from decay.
fn adamw_step(state: &mut TrainState, grads: &EncoderParams, lr: f64, weight_decay: f64) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - num::powf(ADAM_BETA1, t as f64);
    let bc2 = 1.0 - num::powf(ADAM_BETA2, t as f64);

    let mut p_t = state.params.tensors_mut();
    let mut m_t = state.opt_m.tensors_mut();
    let mut v_t = state.opt_v.tensors_mut();
    let g_t = grads.tensors();
    for i in 0..g_t.len() {
        let name = &g_t[i].0;
        let decay = if name.ends_with("_b") || name.ends_with("_shift") || name.ends_with("_scale")
        {
            0.0
        } else {
            weight_decay
        };
        let p = p_t[i].1.as_mut_slice();
        let m = m_t[i].1.as_mut_slice();
        let v = v_t[i].1.as_mut_slice();
        let g = g_t[i].1.as_slice();
        for j in 0..p.len() {
            m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
            v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= lr * (m_hat / (num::sqrt(v_hat) + ADAM_EPS) + decay * p[j]);
        }
    }
}

/// Receives checkpoints during training; implementations do the IO.
pub trait CheckpointSink {
    fn save(&mut self, state: &TrainState) -> Result<(), String>;
}

/// Discards checkpoints.
pub struct NoopSink;

impl CheckpointSink for NoopSink {
    fn save(&mut self, _state: &TrainState) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    /// Mean batch loss per epoch touched by this run.
    pub epoch_losses: Vec<f64>,
    pub steps_run: u64,
}

/// Runs (or resumes) gradient descent over `data.train`.
///
/// Pre-training optimizes masked-token and pairing objectives; fine-tuning
/// optimizes the accepted/unaccepted classification head. Checkpoints are
/// handed to `sink` every `checkpoint_every` steps; a sink failure halts
/// training and returns the in-flight state for resumption.
pub fn train(
    init: TrainState,
    data: &CorpusSplit,
    phase: Phase,
    vocab: &Vocabulary,
    config: &TrainConfig,
    sink: &mut dyn CheckpointSink,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let n = data.train.len();
    if n == 0 && config.epochs > 0 {
        return Err(TrainError::EmptyData);
    }
    let bpe = if n == 0 {
        0
    } else {
        (n + config.batch_size - 1) / config.batch_size
    };
    let schedule_total = (config.epochs as u64) * (bpe as u64);
    let stop = config
        .max_steps
        .map_or(schedule_total, |m| m.min(schedule_total));

    let mut state = init;
    let start = state.step;
    if start >= stop {
        return Ok(TrainOutcome {
            state,
            epoch_losses: Vec::new(),
            steps_run: 0,
        });
    }

    let mut epoch_losses: Vec<(u64, f64, u64)> = Vec::new(); // (epoch, sum, count)
    let mut order: Vec<usize> = Vec::new();
    let mut order_epoch = u64::MAX;

    for step in start..stop {
        let epoch = step / bpe as u64;
        let batch_idx = (step % bpe as u64) as usize;
        if epoch != order_epoch {
            order = (0..n).collect();
            order.shuffle(&mut rng::derive(config.seed, rng::stream::SHUFFLE, epoch));
            order_epoch = epoch;
        }
        let lo = batch_idx * config.batch_size;
        let hi = (lo + config.batch_size).min(n);
        let batch_pairs: Vec<QAPair> = order[lo..hi].iter().map(|&i| data.train[i].clone()).collect();

        let batch = match phase {
            Phase::Pretrain(mode) => {
                let mut step_rng = rng::derive(config.seed, rng::stream::MASK, step);
                make_pretrain_batch_with(&batch_pairs, vocab, config, mode, &mut step_rng)?
            }
            Phase::Finetune => make_finetune_batch(&batch_pairs, vocab, config.max_seq_len)?,
        };

        if !batch.inputs.is_empty() {
            let plan = DropoutPlan::new(rng::derive(config.seed, rng::stream::DROPOUT, step).random());
            let (loss, grads) = loss_and_grads(&state.params, &batch, phase.objectives(), Some(&plan))
                .map_err(|e| match e {
                    TrainError::Numeric { example_id, .. } => TrainError::Numeric {
                        step,
                        example_id,
                    },
                    other => other,
                })?;
            let lr = lr_at(step + 1, schedule_total, config.learning_rate);
            adamw_step(&mut state, &grads, lr, config.weight_decay);

            match epoch_losses.last_mut() {
                Some((e, sum, count)) if *e == epoch => {
                    *sum += loss;
                    *count += 1;
                }
                _ => epoch_losses.push((epoch, loss, 1)),
            }
        } else {
            // Every record in the batch was skipped (sentence mode on
            // single-sentence documents); the step still advances.
            state.step += 1;
        }

        if config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0 {
            if let Err(reason) = sink.save(&state) {
                let step = state.step;
                return Err(TrainError::Checkpoint {
                    step,
                    reason,
                    resumable: Box::new(state),
                });
            }
        }
    }

    let steps_run = state.step - start;
    Ok(TrainOutcome {
        state,
        epoch_losses: epoch_losses
            .into_iter()
            .map(|(_, sum, count)| sum / count.max(1) as f64)
            .collect(),
        steps_run,
    })
}
