//! Seed derivation. Every random stream in the pipeline comes from one master
//! seed through named or indexed sub-seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a named pipeline stage, e.g. `sub_seed(master, "txflow")`.
pub fn sub_seed(master: u64, stage: &str) -> u64 {
    // FNV-1a over the stage name, then mixed with the master seed.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    splitmix64(master ^ splitmix64(h))
}

/// Seed for the `index`-th independent stream under `seed` (channels, batches).
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
