//! Seedable, splittable random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used by every stochastic routine in the crate.
pub type PoseRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> PoseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`; distinct stream ids
/// never overlap for the same seed.
pub fn split(seed: u64, stream: u64) -> PoseRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
