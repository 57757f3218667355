//! Counter-based random substreams.
//!
//! Every Monte Carlo unit of work (a posterior draw, a replication, an inner
//! realization of the limit process) gets its own generator, keyed by its
//! position in the computation rather than by the order in which workers
//! reach it. Results are therefore identical for any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator type handed out for every substream.
pub type StreamRng = ChaCha8Rng;

/// A master seed from which independent, addressable substreams are derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Substreams {
    seed: u64,
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A child family whose streams are disjoint from the parent's other
    /// children. `child(a).stream(&[b])` equals `stream(&[a, b])`.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: mix(self.seed, index),
        }
    }

    /// The generator at `key`.
    pub fn stream(&self, key: &[u64]) -> StreamRng {
        let mut state = key.iter().fold(self.seed, |acc, &k| mix(acc, k));
        let mut bytes = [0u8; 32];
        for chunk in bytes.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }
}

fn mix(acc: u64, k: u64) -> u64 {
    splitmix64(acc ^ splitmix64(k.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
