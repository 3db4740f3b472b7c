//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from ChaCha8 (`rand_chacha`),
//! a counter-based generator whose output is identical on every platform.
//! Independent sub-streams are derived from a base seed with [`stream`], so
//! per-sample or per-worker draws do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sub-stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
