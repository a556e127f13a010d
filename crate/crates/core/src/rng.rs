//! Deterministic random streams.
//!
//! Every random quantity of a path is drawn from a ChaCha8 stream keyed by
//! `(master_seed, path_index, purpose)`. Streams never overlap, so results
//! do not depend on evaluation order or on how paths are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of stream slots reserved per path.
const STREAMS_PER_PATH: u64 = 64;

/// What a stream is used for. Radial shells get their own streams so that
/// changing the small-jump cutoff keeps every jump above the old cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Standard Brownian motion behind the small-jump surrogate.
    SmallJumps,
    /// Jumps with |y| > 1.
    LargeJumps,
    /// Jumps with 2^{-k-1} < |y| ≤ 2^{-k}.
    Shell(u32),
    /// Exact stable marginals on the base grid.
    Marginals,
    /// Probe times and other per-path auxiliaries.
    Probe,
}

/// Highest shell index that has a stream of its own.
pub const MAX_SHELL: u32 = 56;

impl Stream {
    fn slot(self) -> u64 {
        match self {
            Stream::SmallJumps => 0,
            Stream::LargeJumps => 1,
            Stream::Marginals => 2,
            Stream::Probe => 3,
            Stream::Shell(k) => {
                assert!(k <= MAX_SHELL, "shell index {k} out of range");
                4 + u64::from(k)
            }
        }
    }
}

pub fn stream_rng(master_seed: u64, path_index: u64, stream: Stream) -> ChaCha8Rng {
    assert!(path_index < u64::MAX / STREAMS_PER_PATH, "path index too large");
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index * STREAMS_PER_PATH + stream.slot());
    rng
}
