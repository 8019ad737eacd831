//! Seeded random-number plumbing.
//!
//! A scenario is generated from one master seed split into named sub-streams,
//! one per random quantity. Streams are independent, so e.g. changing the data
//! length does not perturb the geometry draw, and growing a Monte-Carlo run
//! does not re-randomize earlier trials.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Named sub-streams of a scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    UeGeometry = 1,
    ApGeometry = 2,
    Shadowing = 3,
    SmallScale = 4,
    Activity = 5,
    Data = 6,
    Noise = 7,
    Pilots = 8,
}

/// RNG for one named sub-stream of `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer. Used to derive per-trial seeds from a base seed so
/// that trial seeds are decorrelated even for consecutive trial indices.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for trial `trial` of a run with base seed `base_seed`.
pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    splitmix64(base_seed ^ trial)
}
