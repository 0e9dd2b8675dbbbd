//! Seeded random streams and inverse-transform simulation.
//!
//! Replicate `k` of a run seeded with `seed` always draws from ChaCha stream
//! `k` of that seed, so replicates can be generated in any order (or in
//! parallel) with identical results.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::ModelParams;
use crate::sample::Sample;

/// Generator for replicate `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` margins drawn as `quantile(u_i)` with `u_i` i.i.d. uniform on `[0, 1)`.
pub fn simulate_margins<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            params.quantile(u).expect("uniform draw lies in [0, 1)")
        })
        .collect()
}

/// Like [`simulate_margins`] but wrapped as a [`Sample`]; `n` must be positive.
pub fn simulate_sample<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R) -> Sample {
    Sample::new(simulate_margins(params, n, rng)).expect("simulated margins are valid")
}
