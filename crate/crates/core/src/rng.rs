//! Counter-based random streams.
//!
//! A stream is addressed by `(master seed, replicate, particle id)`; the draw
//! index is the ChaCha word position. Any particle's randomness can be
//! regenerated without replaying anything else, so results do not depend on
//! how replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Particle id reserved for the initial Poisson field of a replicate.
pub const FIELD_STREAM: u64 = u64::MAX;

/// Address of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replicate: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replicate: u64) -> Self {
        Self { seed, replicate }
    }

    /// The stream owned by one particle of this replicate.
    pub fn particle(&self, id: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replicate.to_le_bytes());
        // Domain tag so streams here never coincide with `auxiliary`.
        key[16..24].copy_from_slice(b"particle");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(id);
        rng
    }

    /// Stream for bookkeeping draws not tied to a particle (bootstrap etc).
    pub fn auxiliary(&self, tag: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replicate.to_le_bytes());
        key[16..24].copy_from_slice(b"auxiliar");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(tag);
        rng
    }
}
