//! Seeded random streams. Every run owns one generator derived from its
//! seed; Monte-Carlo trials use one stream per trial index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for one `(config, seed)` run. All algorithms run with the same
/// seed see the same environment noise.
pub fn run_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
