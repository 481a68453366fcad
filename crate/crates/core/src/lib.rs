//! Core algorithms for question–answer quality modeling.
//!
//! Everything in this crate is pure and deterministic: corpus synthesis and
//! preprocessing, vocabulary construction and pair encoding, a bidirectional
//! transformer encoder with exact analytic gradients, the pre-training and
//! fine-tuning loops, context-naive baselines, and confusion-matrix metrics.
//! File formats, clocks, and the serving layer live in the companion crate.
//!
//! The crate is `no_std` (with `alloc`); all floating-point transcendentals
//! go through `libm` so results are bit-identical regardless of the host
//! math library.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baseline;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod math;
pub mod num;
pub mod rng;
pub mod train;
pub mod vocab;

pub use corpus::{CorpusSplit, PreprocessConfig, QAPair};
pub use encoder::{EncoderConfig, EncoderParams, ForwardTrace};
pub use eval::{ConfusionMatrix, EvalMetrics};
pub use vocab::{EncodedPair, Vocabulary};
