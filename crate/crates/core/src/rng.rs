//! Seeded random streams.
//!
//! Every consumer of randomness inside a run draws from its own ChaCha stream
//! derived from the run seed, so adding draws in one place (e.g. sampling the
//! state bank) never shifts the sequence seen by another (e.g. exploration).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags for the per-run streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    EnvReset = 2,
    Exploration = 3,
    Replay = 4,
    StateBank = 5,
    Probe = 6,
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// The full set of streams used by one training run.
#[derive(Debug, Clone)]
pub struct RunRngs {
    pub init: StreamRng,
    pub env: StreamRng,
    pub exploration: StreamRng,
    pub replay: StreamRng,
    pub bank: StreamRng,
    pub probe: StreamRng,
}

impl RunRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            init: stream(seed, Stream::Init),
            env: stream(seed, Stream::EnvReset),
            exploration: stream(seed, Stream::Exploration),
            replay: stream(seed, Stream::Replay),
            bank: stream(seed, Stream::StateBank),
            probe: stream(seed, Stream::Probe),
        }
    }
}
