//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by a key and
//! a 64-bit stream index. Keys are derived from the user seed and a chain of
//! domain tags, indices from sample and node counters. The numbers seen by a
//! given sample never depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use rand_chacha::ChaCha8Rng as StreamRng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamKey {
    key: [u8; 32],
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"mspk-seed");
        h.update(seed.to_le_bytes());
        Self { key: h.finalize().into() }
    }

    /// Child key for a named domain.
    pub fn derive(&self, tag: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((tag.len() as u64).to_le_bytes());
        h.update(tag.as_bytes());
        Self { key: h.finalize().into() }
    }

    /// Child key for a numeric domain (field index, level, ...).
    pub fn derive_index(&self, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(b"#");
        h.update(index.to_le_bytes());
        Self { key: h.finalize().into() }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

/// Mixes two counters into one stream index (splitmix64 finalizer).
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        ^ b.wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
