//! Deterministic chunked summation.
//!
//! Index ranges are cut into fixed-size chunks. Each chunk is summed
//! sequentially, chunk partials are kept in index order, and partials are
//! combined by a fixed pairwise tree. The result therefore does not depend on
//! the number of worker threads.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub const DEFAULT_CHUNK: u64 = 1 << 14;

/// Environment variable consulted for the default worker count.
pub const THREADS_ENV: &str = "DISTAL_THREADS";

/// How a reduction is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// `threads == 0` uses the rayon default.
    Parallel { threads: usize },
}

impl Default for Exec {
    fn default() -> Self {
        Exec::from_env()
    }
}

impl Exec {
    pub fn from_threads(threads: usize) -> Self {
        if threads == 1 || !cfg!(feature = "parallel") {
            Exec::Sequential
        } else {
            Exec::Parallel { threads }
        }
    }

    pub fn from_env() -> Self {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .unwrap_or(0);
        Exec::from_threads(threads)
    }

    /// Runs `f` over `0..count` and returns results in index order.
    pub fn map_indexed<T, F>(self, count: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => Ok((0..count).map(f).collect()),
            Exec::Parallel { threads } => par_map(threads, count, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(threads: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(_threads: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    Ok((0..count).map(f).collect())
}

/// Fixed-shape pairwise sum.
pub fn pairwise(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        n => {
            let mid = n / 2;
            pairwise(&values[..mid]) + pairwise(&values[mid..])
        }
    }
}

/// Sum over `[start, end)`. `chunk_sum(lo, hi)` must return the sequential sum
/// of the summand over `[lo, hi)`.
pub fn chunked_sum<F>(exec: Exec, start: u64, end: u64, chunk: u64, chunk_sum: F) -> Result<Complex64>
where
    F: Fn(u64, u64) -> Complex64 + Sync + Send,
{
    if end <= start {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let chunk = chunk.max(1);
    let count = (end - start).div_ceil(chunk) as usize;
    let parts = exec.map_indexed(count, |i| {
        let lo = start + i as u64 * chunk;
        let hi = (lo + chunk).min(end);
        chunk_sum(lo, hi)
    })?;
    Ok(pairwise(&parts))
}

/// Partial sums S(N) = Σ_{1 ≤ n ≤ N} at each checkpoint (strictly increasing).
pub fn checkpoint_sums<F>(exec: Exec, checkpoints: &[u64], chunk: u64, chunk_sum: F) -> Result<Vec<Complex64>>
where
    F: Fn(u64, u64) -> Complex64 + Sync + Send,
{
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("checkpoints must be strictly increasing".into()));
    }
    let chunk = chunk.max(1);
    // Chunks never straddle a checkpoint, so each segment is reduced on its own.
    let mut jobs: Vec<(usize, u64, u64)> = Vec::new();
    let mut prev = 1u64;
    for (seg, &n) in checkpoints.iter().enumerate() {
        let end = n + 1;
        let mut lo = prev;
        while lo < end {
            let hi = (lo + chunk).min(end);
            jobs.push((seg, lo, hi));
            lo = hi;
        }
        prev = end.max(prev);
    }
    let parts = exec.map_indexed(jobs.len(), |i| {
        let (_, lo, hi) = jobs[i];
        chunk_sum(lo, hi)
    })?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = Complex64::new(0.0, 0.0);
    let mut j = 0;
    for seg in 0..checkpoints.len() {
        let k = j;
        while j < jobs.len() && jobs[j].0 == seg {
            j += 1;
        }
        acc += pairwise(&parts[k..j]);
        out.push(acc);
    }
    Ok(out)
}
