//! Seeded random streams.
//!
//! Every stochastic routine draws from a [`Streams`] value. A stream family is
//! identified by a 64-bit seed; individual streams are ChaCha8 generators
//! keyed by that seed and selected by a 64-bit stream index, so work split
//! into batches reproduces bit-for-bit no matter how the batches are
//! scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A family of independent, reproducible random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The `index`-th stream of this family.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// A derived family, statistically independent of `self` and of every
    /// other tag.
    pub fn fork(&self, tag: u64) -> Streams {
        Streams {
            seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x5eed))),
        }
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
