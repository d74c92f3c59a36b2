//! Stable 64-bit hashing helpers.
//!
//! Everything that must be reproducible across runs and platforms (token
//! buckets, MinHash slots, derived seeds) goes through these functions
//! rather than `std::hash`, whose output is not guaranteed stable.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer. Full avalanche on 64-bit inputs.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a string under a seed.
pub fn hash_str(s: &str, seed: u64) -> u64 {
    mix64(fnv1a(s.as_bytes()) ^ mix64(seed))
}

/// Derive an independent sub-seed from a master seed and a label.
///
/// Adding a new consumer with a fresh label never perturbs the streams of
/// existing consumers.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    mix64(master ^ fnv1a(label.as_bytes()).rotate_left(17))
}
