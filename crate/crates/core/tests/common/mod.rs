#![allow(dead_code)]

use firdiv_core::{ConvolutionSystem, ImpulseResponse, NonnegMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn positive_matrix(
    rng: &mut ChaCha12Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> NonnegMatrix {
    NonnegMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi)).unwrap()
}

pub fn positive_response(rng: &mut ChaCha12Rng, len: usize, lo: f64, hi: f64) -> ImpulseResponse {
    ImpulseResponse::new((0..len).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Random strictly positive data pair: well posed and strictly convex by
/// construction.
pub fn random_instance(
    rng: &mut ChaCha12Rng,
    max_lags: usize,
    max_experiments: usize,
) -> (NonnegMatrix, NonnegMatrix) {
    let n1 = rng.random_range(1..=max_lags + 1);
    let m = rng.random_range(1..=max_experiments);
    let y = positive_matrix(rng, n1, m, 0.1, 1.1);
    let u = positive_matrix(rng, n1, m, 0.1, 1.1);
    (y, u)
}

pub fn system(u: &NonnegMatrix) -> ConvolutionSystem {
    ConvolutionSystem::new(u.clone()).unwrap()
}
