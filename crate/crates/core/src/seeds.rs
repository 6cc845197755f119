//! Seed derivation for independent random streams.

/// Mixes `base` and `stream` into a new 64-bit seed (splitmix64 finalizer).
pub fn derive(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Arrival stream for episode `episode` (1-based) of a run seeded with `run_seed`.
/// Every controller run under the same seed sees the same traffic.
pub fn episode_seed(run_seed: u64, episode: u32) -> u64 {
    derive(derive(run_seed, 0xE915_0DE5), u64::from(episode))
}
