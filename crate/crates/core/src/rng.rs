//! Deterministic random streams.
//!
//! Every stochastic step derives a fresh ChaCha8 generator from
//! `(seed, stream, index)` instead of advancing one shared generator. Batch
//! shuffling, masking, negative sampling, and dropout therefore depend only
//! on their coordinates, which is what makes resumed training bit-identical
//! to an uninterrupted run.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels; fixed values are part of the determinism contract.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const MASK: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const SYNTH: u64 = 5;
    pub const SPLIT: u64 = 6;
    pub const EMBED: u64 = 7;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for the given coordinates.
pub fn derive(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mixed = splitmix(splitmix(splitmix(seed) ^ stream) ^ index);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// One zero-mean normal draw with the given standard deviation (Box-Muller).
pub fn normal(rng: &mut impl Rng, std: f64) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = crate::num::sqrt(-2.0 * crate::num::ln(u1));
    r * crate::num::cos(2.0 * core::f64::consts::PI * u2) * std
}
