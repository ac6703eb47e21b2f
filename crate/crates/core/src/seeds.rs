//! Named, reproducible random streams.
//!
//! The generator is xoshiro256++ seeded through SplitMix64
//! (`rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64`). Both algorithms are
//! fixed-width integer code, so a seed reproduces the same stream on every
//! platform. Sub-streams are derived from a master seed by hashing the
//! stream tag and an index through the SplitMix64 finalizer.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

pub type Rng = Xoshiro256PlusPlus;

/// Seed increment applied when a subnet sample is rejected.
pub const REJECTION_SEED_STEP: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Subnets,
    Adjacency,
    BInit,
    Layers,
    Shuffle,
    Verifier,
    Data,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Subnets => 1,
            Stream::Adjacency => 2,
            Stream::BInit => 3,
            Stream::Layers => 4,
            Stream::Shuffle => 5,
            Stream::Verifier => 6,
            Stream::Data => 7,
        }
    }
}

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `index` of `stream` under `master`.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix_finalize(master ^ stream.tag().wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix_finalize(a.wrapping_add(index.wrapping_mul(REJECTION_SEED_STEP)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, stream: Stream, index: u64) -> Rng {
    rng_from_seed(derive_seed(master, stream, index))
}

/// Uniform draw on `[0, 1)` from the top 53 bits of one `u64`.
#[inline]
pub fn unit_f64(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
