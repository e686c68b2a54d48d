//! Seeded random streams.
//!
//! Every random decision in the crate draws from a ChaCha8 stream so runs are
//! reproducible across platforms. Parallel work items get their own stream,
//! selected by item id, so the assignment of items to workers never changes
//! the result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `id` of the generator seeded with `seed`.
pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
