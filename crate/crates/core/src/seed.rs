//! Deterministic seed derivation.
//!
//! Every replication of a sweep point gets its own random stream. The stream
//! seed is a pure function of the master seed and a path of indices, so runs
//! are reproducible regardless of how tasks are scheduled.

/// One round of the SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `master` with each index in turn:
/// `s₀ = splitmix64(master)`, `sⱼ₊₁ = splitmix64(sⱼ ⊕ splitmix64(indexⱼ))`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &index| splitmix64(acc ^ splitmix64(index)))
}
