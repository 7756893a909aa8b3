use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Samples per shard. Shard boundaries do not depend on the worker count,
/// so results are identical for any `workers`.
pub const SHARD: u64 = 4096;

/// Folds `step` over sample indices `0..n` in fixed shards, then merges the
/// shard accumulators in index order.
pub fn par_fold<A, I, S, M>(n: u64, workers: usize, init: I, step: S, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) -> Result<()> + Sync,
    M: Fn(&mut A, A),
{
    let shards = n.div_ceil(SHARD);
    let run = |k: u64| -> Result<A> {
        let mut acc = init();
        for i in k * SHARD..((k + 1) * SHARD).min(n) {
            step(&mut acc, i)?;
        }
        Ok(acc)
    };
    let parts: Vec<Result<A>> = if workers <= 1 {
        (0..shards).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::ThreadPool(e.to_string()))?;
        pool.install(|| (0..shards).into_par_iter().map(run).collect())
    };
    let mut acc = init();
    for p in parts {
        merge(&mut acc, p?);
    }
    Ok(acc)
}

/// Exceedance counts of `level(i)` over `i in 0..n`, where `level` is the
/// natural log of a positive sample and `-inf` otherwise.
pub fn count_exceedances<L>(
    n: u64,
    workers: usize,
    grid: &[f64],
    level: L,
) -> Result<ExceedanceCounts>
where
    L: Fn(u64) -> Result<f64> + Sync,
{
    let empty = ExceedanceCounts::new(grid)?;
    par_fold(
        n,
        workers,
        || empty.clone(),
        |acc, i| {
            acc.add(level(i)?);
            Ok(())
        },
        |a, b| a.merge(b),
    )
}

/// Counts of `level > u` for each `u` of a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExceedanceCounts {
    pub grid: Vec<f64>,
    pub counts: Vec<u64>,
    pub n: u64,
}

impl ExceedanceCounts {
    pub fn new(grid: &[f64]) -> Result<Self> {
        if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::BadGrid);
        }
        Ok(ExceedanceCounts {
            grid: grid.to_vec(),
            counts: vec![0; grid.len()],
            n: 0,
        })
    }

    #[inline]
    pub fn add(&mut self, level: f64) {
        self.n += 1;
        let k = self.grid.partition_point(|&u| u < level);
        for c in &mut self.counts[..k] {
            *c += 1;
        }
    }

    pub fn merge(&mut self, other: ExceedanceCounts) {
        self.n += other.n;
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
    }
}
