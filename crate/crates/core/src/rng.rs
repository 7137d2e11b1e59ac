//! Counter-based random streams.
//!
//! A [`StreamKey`] names a family of ChaCha8 streams. The 256-bit ChaCha key
//! is built from the 64-bit run seed and a 64-bit tag accumulated from labels
//! and indices; the ChaCha stream id selects the replicate. Replicate `k` of
//! check `c` under seed `s` therefore always sees the same numbers, whichever
//! thread runs it and in whatever order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator handed to samplers.
pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    tag: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            tag: 0x6a09_e667_f3bc_c908,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive a sub-key identified by a label, e.g. a check name.
    pub fn child(self, label: &str) -> Self {
        Self {
            seed: self.seed,
            tag: mix64(self.tag ^ fnv1a64(label.as_bytes())),
        }
    }

    /// Derive a sub-key identified by an integer, e.g. an iteration number.
    pub fn index(self, i: u64) -> Self {
        Self {
            seed: self.seed,
            tag: mix64(self.tag.rotate_left(23) ^ mix64(i ^ 0x94d0_49bb_1331_11eb)),
        }
    }

    /// Stream number `k` under this key.
    pub fn rng(self, k: u64) -> Stream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.tag.to_le_bytes());
        key[16..24].copy_from_slice(&mix64(self.seed ^ self.tag).to_le_bytes());
        key[24..]
            .copy_from_slice(&mix64(self.tag.wrapping_add(0x9e37_79b9_7f4a_7c15)).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(k);
        rng
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
