//! Deterministic random streams.
//!
//! Every consumer derives its generator from a campaign seed plus a stream
//! identifier. ChaCha is counter based, so a stream can be replayed
//! independently of which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for the same task id disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Dynamics = 0,
    InitialState = 1,
    Training = 2,
    Sampling = 3,
}

pub fn stream(seed: u64, id: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}
