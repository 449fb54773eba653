//! Counter-based Gaussian noise streams.
//!
//! Reproducibility contract: the normal draw for (seed, path, step) is a
//! pure function of that triple. The generator is ChaCha12 with the path
//! index as the stream id; before each draw the word position is pinned to
//! 4·step, and one draw consumes exactly two u64 samples (Box–Muller), so
//! paths can be evaluated in any order, on any number of workers, in any
//! chunking, without changing a single increment.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// One path's noise source.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha12Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, path: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(path);
        Self { rng }
    }

    /// Standard normal for the given step counter.
    ///
    /// Box–Muller from two uniforms; the cosine branch only, so word
    /// consumption per step is fixed at four 32-bit words.
    pub fn standard_normal(&mut self, step: u64) -> f64 {
        self.rng.set_word_pos(4 * step as u128);
        let a: u64 = self.rng.next_u64();
        let b: u64 = self.rng.next_u64();
        // u1 ∈ (0, 1] keeps the logarithm finite; u2 ∈ [0, 1).
        let u1 = ((a >> 11) + 1) as f64 * 2f64.powi(-53);
        let u2 = (b >> 11) as f64 * 2f64.powi(-53);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Wiener increments ΔW_j = √dt · z_j for steps 0..count.
    pub fn wiener_increments(seed: u64, path: u64, count: usize, dt: f64) -> Vec<f64> {
        let mut stream = Self::new(seed, path);
        let scale = dt.sqrt();
        (0..count)
            .map(|step| scale * stream.standard_normal(step as u64))
            .collect()
    }
}
