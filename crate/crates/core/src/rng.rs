//! Counter-based uniform streams for reproducible parallel Monte Carlo.
//!
//! Replicate `i` of a run with seed `s` reads ChaCha8 stream `i` under the key
//! derived from `s`; the draw for coordinate `k` of copy `c ∈ {0, 1}` is the
//! 64-bit word at position `2k + c` of that stream. Any replicate can thus be
//! regenerated on its own, in any order, on any thread.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct NoiseStream {
    key: <ChaCha8Rng as SeedableRng>::Seed,
}

/// Maps 64 random bits to the open interval `(0, 1)`.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: ChaCha8Rng::seed_from_u64(seed).get_seed(),
        }
    }

    fn stream(&self, replicate: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(replicate);
        rng
    }

    /// Fills both copies `(W, W')` of replicate `replicate`.
    pub fn fill_pair(&self, replicate: u64, first: &mut [f64], second: &mut [f64]) {
        debug_assert_eq!(first.len(), second.len());
        let mut rng = self.stream(replicate);
        for (a, b) in first.iter_mut().zip(second.iter_mut()) {
            *a = open_unit(rng.next_u64());
            *b = open_unit(rng.next_u64());
        }
    }

    /// The first copy of replicate `replicate`.
    pub fn single(&self, replicate: u64, dim: usize) -> Vec<f64> {
        let mut a = vec![0.0; dim];
        let mut b = vec![0.0; dim];
        self.fill_pair(replicate, &mut a, &mut b);
        a
    }
}
