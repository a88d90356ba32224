use rand::Rng as _;
use rayon::prelude::*;

use crate::data::{Dataset, Domain};
use crate::error::Result;
use crate::rng::{derive_seed, rng_from_seed, Rng};

const CHUNK: usize = 4096;

/// Cumulative distribution for inverse-CDF draws.
#[derive(Clone, Debug)]
pub(crate) struct Cdf(Vec<f64>);

impl Cdf {
    pub fn new(probs: &[f64]) -> Self {
        let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
        let mut acc = 0.0;
        Cdf(probs
            .iter()
            .map(|p| {
                acc += p.max(0.0) / total;
                acc
            })
            .collect())
    }

    pub fn draw(&self, rng: &mut Rng) -> u32 {
        let u: f64 = rng.random();
        let k = self.0.partition_point(|&c| c <= u);
        k.min(self.0.len() - 1) as u32
    }
}

/// Draws `n` records with `fill`, which writes one record given an RNG.
/// Records are generated in fixed-size chunks with per-chunk seeds, so the
/// output does not depend on the number of threads.
pub(crate) fn sample_records<F>(domain: &Domain, n: usize, seed: u64, fill: F) -> Result<Dataset>
where
    F: Fn(&mut Rng, &mut [u32]) + Sync,
{
    let d = domain.len();
    let chunks: Vec<Vec<u32>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            let mut rng = rng_from_seed(derive_seed(seed, &[c as u64]));
            let mut buf = vec![0u32; len * d];
            for rec in buf.chunks_mut(d.max(1)).take(len) {
                fill(&mut rng, rec);
            }
            buf
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(n); d];
    for buf in &chunks {
        for rec in buf.chunks(d.max(1)) {
            for (col, &v) in columns.iter_mut().zip(rec) {
                col.push(v);
            }
        }
    }
    Dataset::from_columns(domain.clone(), columns)
}
