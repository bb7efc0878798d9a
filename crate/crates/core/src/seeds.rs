//! Named sub-seed derivation.
//!
//! Every random choice in the pipeline flows from one root seed through a
//! named stream, so any component can be reproduced in isolation (the corpus
//! generator, the split, a particular training repeat) without replaying the
//! whole run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives a child seed from a root seed and a stream name.
///
/// FNV-1a over the name, mixed with the root via splitmix64. Stable across
/// platforms and releases; the exact constants are part of the on-disk
/// reproducibility contract.
pub fn sub_seed(root: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(root ^ h)
}

/// A seeded RNG for a named stream.
pub fn stream_rng(root: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(root, name))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_seeds_are_stable_and_distinct() {
        assert_eq!(sub_seed(7, "corpus"), sub_seed(7, "corpus"));
        assert_ne!(sub_seed(7, "corpus"), sub_seed(7, "split"));
        assert_ne!(sub_seed(7, "corpus"), sub_seed(8, "corpus"));
    }
}
