//! Seed derivation for nested deterministic randomness.
//!
//! Sweep cells, synthetic tensors, and other sub-streams derive their seeds
//! from `(parent seed, index)` so extending an axis or adding a tensor never
//! perturbs the streams of existing ones.

/// Derive a child seed from a parent seed and an index (splitmix64 finalizer).
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut x = parent ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
