//! Confusion-matrix metrics and whole-testset evaluation.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::QAPair;
use crate::encoder::{predict_quality, EncoderParams};
use crate::vocab::{encode_pair, Vocabulary};

/// Counts with "accepted" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.true_pos += 1,
            (true, false) => self.false_pos += 1,
            (false, true) => self.false_neg += 1,
            (false, false) => self.true_neg += 1,
        }
    }
}

/// Which metrics had a zero denominator (their value is reported as 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DegenerateFlags {
    pub precision: bool,
    pub recall: bool,
    pub specificity: bool,
    pub f1: bool,
}

impl DegenerateFlags {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.specificity || self.f1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub degenerate: DegenerateFlags,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    EmptyMatrix,
    EmptyTestSet,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyMatrix => write!(f, "confusion matrix has no observations"),
            EvalError::EmptyTestSet => write!(f, "test set is empty"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Derives the metric block from a confusion matrix. Zero-denominator
/// metrics come back as 0 with the corresponding degeneracy flag set.
pub fn metrics(cm: &ConfusionMatrix) -> Result<EvalMetrics, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut flags = DegenerateFlags::default();
    let tp = cm.true_pos as f64;
    let fp = cm.false_pos as f64;
    let fn_ = cm.false_neg as f64;
    let tn = cm.true_neg as f64;

    let accuracy = (tp + tn) / cm.total() as f64;
    let precision = if tp + fp == 0.0 {
        flags.precision = true;
        0.0
    } else {
        tp / (tp + fp)
    };
    let recall = if tp + fn_ == 0.0 {
        flags.recall = true;
        0.0
    } else {
        tp / (tp + fn_)
    };
    let specificity = if tn + fp == 0.0 {
        flags.specificity = true;
        0.0
    } else {
        tn / (tn + fp)
    };
    let f1 = if precision + recall == 0.0 {
        flags.f1 = true;
        0.0
    } else {
        f1_from_pr(precision, recall)
    };
    Ok(EvalMetrics {
        accuracy,
        precision,
        recall,
        specificity,
        f1,
        degenerate: flags,
    })
}

/// Classification outcome over a test set.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub metrics: EvalMetrics,
    /// Pairs that failed to encode, as (id, reason); excluded from the matrix.
    pub excluded: Vec<(String, String)>,
}

/// Classifies every pair with the encoder at the given depth and tallies the
/// confusion matrix. Deterministic: repeated calls yield identical results.
pub fn evaluate(
    params: &EncoderParams,
    test: &[QAPair],
    vocab: &Vocabulary,
    n_active_layers: usize,
) -> Result<Evaluation, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut cm = ConfusionMatrix::default();
    let mut excluded = Vec::new();
    let max_len = params.config.max_seq_len;
    for pair in test {
        let encoded = match encode_pair(&pair.question, &pair.answer, vocab, max_len) {
            Ok(e) => e,
            Err(e) => {
                excluded.push((pair.id.clone(), alloc::format!("{e}")));
                continue;
            }
        };
        match predict_quality(params, &encoded, n_active_layers) {
            Ok((_, label)) => cm.record(label, pair.accepted),
            Err(e) => excluded.push((pair.id.clone(), alloc::format!("{e}"))),
        }
    }
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let metrics = metrics(&cm)?;
    Ok(Evaluation {
        confusion: cm,
        metrics,
        excluded,
    })
}
