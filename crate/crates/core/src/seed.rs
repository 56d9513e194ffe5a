//! Derivation of independent RNG streams from the single run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named stream identifiers. Agent `k` uses `AGENT_BASE + k`.
pub mod stream {
    pub const ENV: u64 = 1;
    pub const EVAL: u64 = 2;
    pub const BASELINE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SCHEDULE: u64 = 5;
    pub const AGENT_BASE: u64 = 100;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stream.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream))
}
