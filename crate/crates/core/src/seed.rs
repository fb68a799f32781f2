//! Seed derivation and counter-based random streams.
//!
//! Every random draw comes from a ChaCha8 generator keyed by a 64-bit seed
//! and a 64-bit stream id. Distinct `(seed, stream)` pairs give independent
//! sequences, so each study, split or test set owns its stream and adding
//! studies never perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids. Study `k` (0 = target) draws from stream `STUDY + k`.
pub mod streams {
    pub const STUDY: u64 = 0;
    pub const SHIFT: u64 = 1 << 32;
    pub const TEST: u64 = 1 << 33;
    pub const SPLIT: u64 = 1 << 34;
    pub const SPLIT_INNER: u64 = (1 << 34) + 1;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `replication` at sweep position `value_index`:
/// `mix64(mix64(mix64(base) ^ value_index) ^ replication)`.
pub fn derive_seed(base: u64, value_index: u64, replication: u64) -> u64 {
    mix64(mix64(mix64(base) ^ value_index) ^ replication)
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
