//! Seeded random streams.
//!
//! Every consumer draws from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! the experiment seed via `seed_from_u64`, with a distinct stream number
//! per consumer. Results therefore depend only on the seed and the stream,
//! never on call order between consumers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    HeadInit = 2,
    Batches = 3,
    Labels = 4,
    Noise = 5,
    Split = 6,
    Subsample = 7,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
