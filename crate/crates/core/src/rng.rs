//! Seed derivation. All randomness in the crate flows from ChaCha8 streams
//! seeded through [`mix`], so results are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a parent seed with a stream index into an independent seed.
pub fn mix(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng_for(seed: u64, stream: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream))
}

/// Stream tags, kept distinct so unrelated consumers never share a stream.
pub mod stream {
    pub const DOMAIN: u64 = 0x1000;
    pub const RESAMPLE: u64 = 0x2000;
    pub const INIT: u64 = 0x3000;
    pub const TRAIN: u64 = 0x4000;
}
