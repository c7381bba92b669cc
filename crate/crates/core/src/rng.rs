//! Seedable random streams with deterministic child-stream derivation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer, used to decorrelate derived seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single-owner pseudorandom stream.
///
/// Identical seeds yield identical draw sequences. Workers that need their
/// own randomness get a [`RngStream::child`] stream instead of sharing one.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(mix(seed)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent stream from this stream's seed and `index`.
    ///
    /// The result depends only on `(seed, index)`, never on how many draws
    /// the parent has already made.
    pub fn child(&self, index: u64) -> Self {
        Self::new(mix(self.seed ^ mix(index.wrapping_add(0xA5A5_A5A5))))
    }

    /// Derives a fresh stream from the current state of this stream.
    pub fn split(&mut self) -> Self {
        Self::new(self.inner.next_u64())
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
