//! Seeded, chunked Monte Carlo helpers.
//!
//! Every chunk draws from its own ChaCha stream keyed by `(seed, chunk)`, so
//! results do not depend on how rayon schedules the chunks.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Result;

pub const CHUNK: usize = 4096;

pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Fills `buf` with independent standard normal draws.
pub fn fill_gaussian(rng: &mut ChaCha8Rng, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// Evaluates `f` on every row of `xi`, in parallel, preserving row order.
pub fn map_rows<F>(xi: &DMatrix<f64>, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let (n, m) = xi.shape();
    (0..n)
        .into_par_iter()
        .map(|row| {
            let point: Vec<f64> = (0..m).map(|k| xi[(row, k)]).collect();
            f(&point)
        })
        .collect()
}

/// Counts the standard Gaussian samples (dimension `dim`) for which `event` holds.
pub fn count_events<F>(n: usize, dim: usize, seed: u64, event: F) -> Result<u64>
where
    F: Fn(&[f64]) -> Result<bool> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let counts: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let mut point = vec![0.0; dim];
            let mut hits = 0u64;
            for _ in 0..len {
                fill_gaussian(&mut rng, &mut point);
                if event(&point)? {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    Ok(counts.iter().sum())
}
