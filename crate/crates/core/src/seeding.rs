//! Deterministic derivation of independent random streams.
//!
//! Every run owns a single master seed. Each consumer of randomness
//! (shuffling, batch sampling, each evaluation event, online interaction)
//! draws from its own stream derived from `(master, label, index)`, so the
//! order in which subsystems consume randomness never perturbs the others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derives a child seed from a master seed, a stream label, and an index.
pub fn stream_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a(label.as_bytes()) ^ splitmix64(index))
}

/// A seeded random source for one stream.
pub fn stream_rng(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, label, index))
}
