//! Seeded, replayable random streams.
//!
//! A stream is identified by `(master_seed, stream_id)`. The generator seed is
//! `splitmix64(master_seed ^ splitmix64(stream_id))`, expanded into a ChaCha8
//! key by [`SeedableRng::seed_from_u64`]. Identical identifiers replay identical
//! sequences on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator seed for `(master_seed, stream_id)`.
#[inline]
pub fn derive_seed(master_seed: u64, stream_id: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(stream_id))
}

/// Folds a tuple of identifiers (trial index, n, mechanism, ...) into one stream id.
pub fn stream_id_of(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5851_F42D_4C95_7F2D, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(master_seed, stream_id)),
        }
    }

    /// Stream 0 of `seed`.
    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent child stream keyed by this stream's identity and `id`.
    /// Does not consume randomness from `self`.
    pub fn child(&self, id: u64) -> RngStream {
        RngStream::new(derive_seed(self.master_seed, self.stream_id), id)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
