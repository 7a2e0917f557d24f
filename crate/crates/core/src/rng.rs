//! Seeded random streams.
//!
//! ChaCha is counter based: one 64-bit seed plus a stream index gives an
//! independent, reproducible generator per chain or per experiment cell.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Generator for stream `stream` of the family selected by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
