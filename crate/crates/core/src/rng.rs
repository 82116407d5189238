//! Seeded, splittable random streams.
//!
//! A root seed is split into independent ChaCha8 streams indexed by path
//! number, so results never depend on how paths are scheduled over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every draw in the crate.
pub type PathRng = ChaCha8Rng;

/// Independent substream `index` of the root `seed`.
pub fn substream(seed: u64, index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
