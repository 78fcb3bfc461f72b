//! Seeded random source shared by every stochastic component.
//!
//! Designs, tuners and synthetic scenes all draw from ChaCha8, a
//! counter-based stream cipher generator: a seed of `u64` expands to the
//! 256-bit ChaCha key via `SeedableRng::seed_from_u64`, and output words are
//! the keystream blocks in counter order. Results are therefore identical on
//! every platform for a given seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StudyRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> StudyRng {
    ChaCha8Rng::seed_from_u64(seed)
}
