//! Reproducible parallel Monte Carlo.
//!
//! A run of `n` samples is cut into fixed-size chunks. Chunk `c` draws from
//! `ChaCha8Rng::seed_from_u64(base)` on stream `c`, where `base` is taken from
//! the caller's generator. Chunk boundaries do not depend on the rayon pool
//! size and partial results are collected in chunk order, so every reduction
//! is bit-identical for any worker count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const CHUNK: usize = 512;

/// Runs `f(chunk_rng, chunk_len)` over all chunks, returning the outputs in chunk order.
pub fn map_chunks<R, T, F>(rng: &mut R, n: usize, f: F) -> Vec<T>
where
    R: RngCore + ?Sized,
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let base = rng.next_u64();
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut chunk_rng = ChaCha8Rng::seed_from_u64(base);
            chunk_rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            f(&mut chunk_rng, len)
        })
        .collect()
}

/// Runs `f` once per sample and returns all samples in draw order.
pub fn map_samples<R, T, F>(rng: &mut R, n: usize, f: F) -> Vec<T>
where
    R: RngCore + ?Sized,
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    map_chunks(rng, n, |r, len| (0..len).map(|_| f(r)).collect::<Vec<T>>())
        .into_iter()
        .flatten()
        .collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            std_err: 0.0,
            n: 1,
        }
    }

    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, std_err, n }
    }

    /// `mean - z * std_err`
    pub fn lower(&self, z: f64) -> f64 {
        self.mean - z * self.std_err
    }

    pub fn upper(&self, z: f64) -> f64 {
        self.mean + z * self.std_err
    }
}

/// Percentile bootstrap confidence interval for the mean.
pub fn bootstrap_mean_ci<R: Rng + ?Sized>(
    samples: &[f64],
    level: f64,
    n_boot: usize,
    rng: &mut R,
) -> (f64, f64) {
    let n = samples.len();
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| {
            let mut acc = 0.0;
            for _ in 0..n {
                acc += samples[rng.random_range(0..n)];
            }
            acc / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = ((alpha * n_boot as f64).floor() as usize).min(n_boot - 1);
    let hi = (((1.0 - alpha) * n_boot as f64).ceil() as usize).min(n_boot - 1);
    (means[lo], means[hi])
}
