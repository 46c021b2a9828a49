//! Counter-based random streams: each `(master seed, trial, purpose)` gets
//! an independent ChaCha stream, so results do not depend on the order in
//! which trials run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Liquid = 0,
    Patterns = 1,
    Plasticity = 2,
    Readout = 3,
    Probe = 4,
    SecondLiquid = 5,
}

pub fn stream(master_seed: u64, trial: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((trial as u64) << 8) | purpose as u64);
    rng
}

/// A 64-bit seed drawn from the given stream (for APIs that take a seed).
pub fn derived_seed(master_seed: u64, trial: usize, purpose: Purpose) -> u64 {
    use rand::Rng;
    stream(master_seed, trial, purpose).random()
}
