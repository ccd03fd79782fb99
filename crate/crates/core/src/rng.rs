//! Seeded, platform-independent random streams.

use rand::SeedableRng;

/// Generator used by every run. ChaCha output is specified bit-for-bit, so a
/// seed reproduces the same stream on every platform.
pub type NsRng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> NsRng {
    NsRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `(cell, replicate)` under `base`. Distinct pairs with indices
/// below 2³² always map to distinct seeds because the packing and the mixer
/// are both injective.
pub fn derive_seed(base: u64, cell: u32, replicate: u32) -> u64 {
    base ^ mix64(((cell as u64) << 32) | replicate as u64)
}
