//! Deterministic RNG substream derivation.
//!
//! Every random quantity in an experiment comes from a named substream
//! derived from the master seed, so geometry, training, evaluation, and
//! codebook initialization stay independent: changing the trial count never
//! changes a trained codebook, and parallel workers can regenerate any
//! stream from `(master_seed, tag, indices...)` alone.
//!
//! The splitting rule is a splitmix64 chain:
//!
//! ```text
//! seed = splitmix64(master)
//! for part in parts: seed = splitmix64(seed ^ part)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream tag: per-experiment network geometry (h, obs noise, distances).
pub const STREAM_GEOMETRY: u64 = 1;
/// Substream tag: training-set channel realizations.
pub const STREAM_TRAINING: u64 = 2;
/// Substream tag: evaluation channel realizations (one per trial).
pub const STREAM_EVAL: u64 = 3;
/// Substream tag: codebook initialization (codeword selection).
pub const STREAM_CODEBOOK_INIT: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derive a substream seed from the master seed and a path of parts
/// (typically a `STREAM_*` tag followed by indices like K, L, or trial).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &p in parts {
        s = splitmix64(s ^ p);
    }
    s
}

/// A ChaCha stream positioned at the start of the derived substream.
pub fn stream_rng(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}
