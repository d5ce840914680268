//! Derived random streams.
//!
//! All randomness flows from one master seed through pure 64-bit mixing:
//! task sections, replications, and tree vertices each get their own stream
//! keyed by integer labels. Two consequences the rest of the crate relies
//! on: results are independent of thread scheduling, and any subtree can be
//! regrown bit-identically from its vertex labels alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Finalizer from splitmix64; bijective with full avalanche.
fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A handle into the stream derivation tree. Copyable and inert; nothing is
/// consumed until [`RngStream::rng`] materializes a generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    state: u64,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            state: avalanche(master_seed.wrapping_add(GOLDEN)),
        }
    }

    /// Child stream under an integer label. Distinct label sequences give
    /// streams without observable correlation; collisions are negligible at
    /// the stream counts this crate creates.
    pub fn substream(self, label: u64) -> Self {
        let salted = avalanche(label.wrapping_add(GOLDEN));
        Self {
            state: avalanche(self.state ^ salted ^ GOLDEN),
        }
    }

    /// Stream for replication `index` of a Monte Carlo section.
    pub fn replication(self, index: u64) -> Self {
        self.substream(index)
    }

    /// Named stream for a task section; FNV-1a over the label bytes.
    pub fn named(self, label: &str) -> Self {
        let mut h = self.state ^ 0xcbf2_9ce4_8422_2325;
        for &b in label.as_bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3);
        }
        Self {
            state: avalanche(h),
        }
    }

    /// Materialize the generator for this stream.
    pub fn rng(self) -> ChaCha8Rng {
        let mut s = self.state;
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            s = s.wrapping_add(GOLDEN);
            chunk.copy_from_slice(&avalanche(s).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }

    /// Raw state; recorded in caches so a stored run names its stream.
    pub fn state(self) -> u64 {
        self.state
    }
}
