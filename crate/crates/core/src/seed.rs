//! Seed splitting.
//!
//! Every random stream in the pipeline is derived from one master seed by
//! [`derive_seed`], so results never depend on the order in which parallel
//! work is scheduled. The rule is
//!
//! ```text
//! sub = splitmix64(splitmix64(master ^ splitmix64(stream)) ^ splitmix64(index + 1))
//! ```
//!
//! where `splitmix64` is the 64-bit finalizer of the SplitMix generator.
//! Streams are small fixed tags (see the `STREAM_*` constants).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_LIBRARY: u64 = 1;
pub const STREAM_TRUTH: u64 = 2;
pub const STREAM_OBS_NOISE: u64 = 3;
pub const STREAM_DICTIONARY: u64 = 4;
pub const STREAM_PERTURB: u64 = 5;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
