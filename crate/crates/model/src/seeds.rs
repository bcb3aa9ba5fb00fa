//! Stream-splitting for reproducible randomness. Every random draw in
//! training is keyed by its role and position instead of by a shared RNG, so
//! any step can be reproduced (and training resumed) in isolation.

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of integers.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

pub const INIT: u64 = 1;
pub const TRAIN_INSTANCE: u64 = 2;
pub const SAMPLE: u64 = 3;
pub const VALIDATION: u64 = 4;
