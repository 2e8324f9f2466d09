//! Seeded random streams.
//!
//! Every unit of simulated work (a pair, a profile, a fold shuffle) gets its
//! own ChaCha8 stream keyed by `(master seed, domain, index)`, so results do
//! not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the random streams of independent pipeline stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    NullPairs,
    AltPairs,
    Profiles,
    Folds,
    Other(u64),
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::NullPairs => 1,
            Domain::AltPairs => 2,
            Domain::Profiles => 3,
            Domain::Folds => 4,
            Domain::Other(t) => 0x100 + t,
        }
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator for work item `index` of `domain` under `seed`.
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(domain.tag())));
    rng.set_stream(index);
    rng
}
