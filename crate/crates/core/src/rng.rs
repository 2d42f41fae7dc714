//! Seed streams for reproducible parallel work.
//!
//! Every chain, bootstrap replicate, and simulated dataset draws from its own
//! ChaCha8 stream, keyed by the master seed and a path of indices. The same
//! path always yields the same stream, independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type BorpsRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A node in a tree of derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            key: splitmix64(master_seed),
        }
    }

    /// Child stream for `index`; siblings are pairwise independent.
    pub fn child(&self, index: u64) -> Self {
        Self {
            key: splitmix64(self.key ^ splitmix64(index.wrapping_add(0xA5A5_A5A5))),
        }
    }

    pub fn path(&self, indices: &[u64]) -> Self {
        indices.iter().fold(*self, |s, &i| s.child(i))
    }

    /// Seed suitable for a nested `FitConfig` or another `SeedStream`.
    pub fn seed(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> BorpsRng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}

pub fn rng_from_seed(seed: u64) -> BorpsRng {
    ChaCha8Rng::seed_from_u64(seed)
}
