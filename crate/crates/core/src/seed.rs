//! Seed derivation tree.
//!
//! Every random stream in the pipeline is keyed by `derive(parent, tag)`,
//! so the output of one component never depends on how many numbers another
//! component drew.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used across the crate.
pub mod stream {
    pub const DATASET: u64 = 0x01;
    pub const INIT: u64 = 0x02;
    pub const SHUFFLE: u64 = 0x03;
    pub const TRAIN_SHOTS: u64 = 0x04;
    pub const SURROGATE: u64 = 0x10;
    pub const PERTURB: u64 = 0x11;
    pub const MEASURE: u64 = 0x12;
    pub const BASE_MEASURE: u64 = 0x13;
    pub const FLIP: u64 = 0x14;
    pub const FIDELITY: u64 = 0x20;
    pub const RANDOM_EXPLAINER: u64 = 0x21;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `index` under `parent`.
pub fn derive(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

/// Child seed two levels down: `derive(derive(parent, a), b)`.
pub fn derive2(parent: u64, a: u64, b: u64) -> u64 {
    derive(derive(parent, a), b)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
