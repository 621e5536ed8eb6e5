//! Deterministic seed streams for Monte-Carlo work.
//!
//! Every independent unit of work (a trial, an optimizer restart) gets its own
//! stream whose seed is derived from a master seed and the unit's index path.
//! Results therefore never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream handed to every stochastic operation.
pub type SeedStream = ChaCha8Rng;

pub fn seed_stream(seed: u64) -> SeedStream {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a master seed together with an index path, e.g. `[sweep, trial]`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &idx| {
        splitmix64(acc ^ splitmix64(idx.wrapping_add(1)))
    })
}

pub fn derived_stream(master: u64, path: &[u64]) -> SeedStream {
    seed_stream(derive_seed(master, path))
}
