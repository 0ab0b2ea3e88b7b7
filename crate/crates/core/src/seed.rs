//! Deterministic sub-seed derivation.
//!
//! Every random quantity in a run is keyed by a tuple of integers (root seed,
//! sample index, matrix coordinates) rather than by the order in which it is
//! drawn. Two 64-bit lanes are produced by chaining the SplitMix64 finalizer
//! over the tuple with distinct lane constants; the resulting 128 bits are
//! expanded to the 256-bit Xoshiro256++ state with two further finalizer
//! rounds.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type EntryRng = Xoshiro256PlusPlus;

const LANE_A: u64 = 0x9E37_79B9_7F4A_7C15;
const LANE_B: u64 = 0xD1B5_4A32_D192_ED03;
const EXPAND: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lane(words: &[u64], constant: u64) -> u64 {
    words.iter().fold(constant, |acc, &w| {
        mix64(acc.wrapping_add(constant) ^ mix64(w.wrapping_add(constant)))
    })
}

/// 128-bit key for an ordered tuple of words.
pub fn mix128(words: &[u64]) -> (u64, u64) {
    (lane(words, LANE_A), lane(words, LANE_B))
}

/// Seed of the `index`-th Monte Carlo sample under `root`.
pub fn sample_seed(root: u64, index: u64) -> u64 {
    let (hi, lo) = mix128(&[root, index, 0x5A4D_504C]);
    hi ^ lo.rotate_left(32)
}

/// Generator for matrix entry `(i, j)` of the ensemble keyed by `seed`.
pub fn entry_rng(seed: u64, i: u64, j: u64) -> EntryRng {
    rng_from_key(mix128(&[seed, i, j]))
}

/// Generator keyed by an arbitrary word tuple.
pub fn keyed_rng(words: &[u64]) -> EntryRng {
    rng_from_key(mix128(words))
}

fn rng_from_key((a, b): (u64, u64)) -> EntryRng {
    let mut bytes = [0u8; 32];
    let words = [a, b, mix64(a ^ EXPAND), mix64(b.wrapping_add(EXPAND))];
    for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    Xoshiro256PlusPlus::from_seed(bytes)
}
