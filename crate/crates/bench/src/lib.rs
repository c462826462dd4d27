//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sctsa_core::DistanceMatrix;

/// Uniform points in the unit cube.
pub fn points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

pub fn cloud(n: usize, dim: usize, seed: u64) -> DistanceMatrix {
    let pts = points(n, dim, seed);
    DistanceMatrix::from_fn(n, |i, j| {
        pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    })
    .expect("finite distances")
}

/// Timestamps cycling through `groups` values.
pub fn timestamps(n: usize, groups: u32) -> Vec<u32> {
    (0..n as u32).map(|i| i % groups).collect()
}
