//! Deterministic random streams.
//!
//! Parallel Monte Carlo tasks draw from `task_rng(master_seed, index)`, so a
//! result depends only on the seed and the task index, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream for task `index` under `master_seed`.
pub fn task_rng(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Sequential stream used when a single generator is enough.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
