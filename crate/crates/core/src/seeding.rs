//! Deterministic derivation of per-task RNG seeds.
//!
//! Sweeps, subdivision passes and sampling loops all derive their seeds
//! from a base seed plus integer tags (ratio index, repeat index, group
//! index, ...). Seeds therefore do not depend on scheduling order, which
//! keeps every parallel run reproducible.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from `seed` and a sequence of tags. Stable across
/// versions; the derivation is part of the reproducibility contract.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}
