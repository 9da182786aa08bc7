//! Random number generation.
//!
//! All randomness flows through ChaCha8 (`rand_chacha`), a counter-based
//! stream cipher generator. A run is keyed by a 64-bit seed; independent
//! sub-tasks (per-node learners, per-trial estimators, parallel seeds) get
//! their own 64-bit stream id via [`stream`], so results never depend on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Pinned generator description, embedded in run metadata.
pub const GENERATOR: &str = "rand_chacha::ChaCha8Rng; seed_from_u64(seed), set_stream(id)";

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for sub-task `id` of the run keyed by `seed`.
pub fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
