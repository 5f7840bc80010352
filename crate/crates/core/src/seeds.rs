//! Seed partitioning.
//!
//! Every stochastic stage draws from its own stream derived from the run seed
//! and a stream label, so toggling one stage (e.g. neuron heterogeneity) never
//! shifts the random numbers another stage (e.g. wiring) sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const TOPOLOGY: &str = "topology";
pub const WEIGHTS: &str = "weights";
pub const INPUTS: &str = "inputs";
pub const INPUT_WEIGHTS: &str = "input-weights";
pub const READOUT: &str = "readout";
pub const NEURONS: &str = "neurons";
pub const STDP: &str = "stdp";
pub const DATA: &str = "data";
pub const BO: &str = "bo";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a stream label (FNV-1a of the label,
/// mixed with splitmix64).
pub fn derive(base: u64, stream: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(base) ^ h)
}

/// Derives a child seed indexed by an integer (replicate, cell, ...).
pub fn derive_indexed(base: u64, stream: &str, index: u64) -> u64 {
    splitmix64(derive(base, stream) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng(base: u64, stream: &str) -> Rng {
    Rng::seed_from_u64(derive(base, stream))
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
