//! Named, reproducible random streams.
//!
//! Every stochastic component receives its generator explicitly. Streams are
//! ChaCha8 keyed by a 64-bit seed and separated by a stream id, so workers
//! derived from the same seed never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids used across the crate.
pub mod streams {
    pub const WORLD_INIT: u64 = 1;
    pub const ENV: u64 = 2;
    pub const INIT_WEIGHTS: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const ROLLOUT_BASE: u64 = 1 << 32;
}

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mix two seeds into one (splitmix64 finalizer over the combination).
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
