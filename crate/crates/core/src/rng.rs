//! Reproducible per-trajectory random streams.
//!
//! Every trajectory gets its own ChaCha12 keystream: the key is derived from
//! the master seed and the 64-bit ChaCha stream number is the trajectory
//! index. Within that keystream, disjoint blocks of 2^60 words serve as
//! substreams for the initial heading, the initial curvature and the
//! dynamics noise. Output therefore depends only on `(master_seed,
//! stream_id)`, never on scheduling.
//!
//! Normal deviates use the ziggurat transform of `rand_distr::StandardNormal`
//! at the version pinned in `Cargo.lock`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

const SUBSTREAM_SHIFT: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Substream {
    Heading = 0,
    Curvature = 1,
    Dynamics = 2,
}

fn substream(master_seed: u64, stream_id: u64, which: Substream) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng.set_word_pos((which as u128) << SUBSTREAM_SHIFT);
    rng
}

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    heading: ChaCha12Rng,
    curvature: ChaCha12Rng,
    dynamics: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
            heading: substream(master_seed, stream_id, Substream::Heading),
            curvature: substream(master_seed, stream_id, Substream::Curvature),
            dynamics: substream(master_seed, stream_id, Substream::Dynamics),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on `[0, 1)` from the heading substream.
    pub(crate) fn heading_uniform(&mut self) -> f64 {
        self.heading.random::<f64>()
    }

    /// Standard normal draw from the curvature substream.
    pub(crate) fn curvature_normal(&mut self) -> f64 {
        self.curvature.sample(StandardNormal)
    }

    /// Standard normal draw from the dynamics substream.
    pub fn standard_normal(&mut self) -> f64 {
        self.dynamics.sample(StandardNormal)
    }
}
