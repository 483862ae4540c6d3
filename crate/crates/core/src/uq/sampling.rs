use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First stream id of the reserved held-out evaluation set.
pub const HELD_OUT_STREAM: u64 = 1 << 62;

/// One point of the random space, components i.i.d. uniform on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSample {
    pub z: Vec<f64>,
    pub stream: u64,
}

impl RandomSample {
    /// Draws the sample owned by `stream`; the result depends only on
    /// `(master_seed, stream, dim)`.
    pub fn from_stream(master_seed: u64, stream: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        let z = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self { z, stream }
    }
}

pub fn draw_samples(n: usize, dim: usize, master_seed: u64) -> Vec<RandomSample> {
    draw_samples_at(0, n, dim, master_seed)
}

/// Samples for streams `first..first + n`.
pub fn draw_samples_at(first: u64, n: usize, dim: usize, master_seed: u64) -> Vec<RandomSample> {
    (0..n as u64)
        .map(|i| RandomSample::from_stream(master_seed, first + i, dim))
        .collect()
}
