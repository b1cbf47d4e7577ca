//! Keyed random streams.
//!
//! Every stochastic decision in a traversal is drawn from a generator keyed by
//! `(seed, tree, depth, slot)`, so the order in which workers visit trees can
//! never change a sampled value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A root seed plus the rules for deriving independent substreams from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for the `index`-th Monte-Carlo run, training round, etc.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream::new(mix64(self.seed ^ mix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15))))
    }

    /// Generator used when expanding the forest node at `(tree, depth, slot)`.
    pub fn walker(&self, tree: u64, depth: u64, slot: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&tree.to_le_bytes());
        key[16..24].copy_from_slice(&depth.to_le_bytes());
        key[24..].copy_from_slice(&slot.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// A general-purpose generator for this stream (batch sampling, init, negatives).
    pub fn generator(&self) -> ChaCha8Rng {
        // u64::MAX tree id is never produced by a traversal.
        self.walker(u64::MAX, 0, 0)
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn walker_streams_are_keyed() {
        let s = RngStream::new(7);
        let a: u64 = s.walker(1, 2, 3).gen();
        let b: u64 = s.walker(1, 2, 3).gen();
        let c: u64 = s.walker(1, 2, 4).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn substreams_differ() {
        let s = RngStream::new(1);
        assert_ne!(s.substream(0), s.substream(1));
        assert_eq!(s.substream(5), s.substream(5));
    }
}
