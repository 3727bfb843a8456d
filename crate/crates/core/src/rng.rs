//! Counter-style random streams keyed by `(seed, replicate, stream)`.
//!
//! Every replicate draws from its own ChaCha20 stream, so results do not
//! depend on the order or the thread in which replicates are generated.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream identifiers, one per independent consumer of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    GaussianPath = 1,
    RosenblattPartialSum = 2,
    RosenblattSpectral = 3,
    MonteCarloIntegral = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngKey {
    pub seed: u64,
    pub replicate: u64,
    pub stream: Stream,
}

impl RngKey {
    pub fn new(seed: u64, replicate: u64, stream: Stream) -> Self {
        Self {
            seed,
            replicate,
            stream,
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replicate.to_le_bytes());
        key[16..24].copy_from_slice(&(self.stream as u64).to_le_bytes());
        key[24..].copy_from_slice(b"hermscal");
        ChaCha20Rng::from_seed(key)
    }
}
