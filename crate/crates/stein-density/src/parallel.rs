//! Parallel collection. Sample `i` depends only on `(seed, i)`, so worker
//! count changes the schedule but never the batch.

use std::num::NonZeroUsize;
use std::thread;

use stein_density_core::conditional::{collect_range, SampleBatch, MIN_SAMPLES};
use stein_density_core::stein::SteinKernel;
use stein_density_core::{Error, Result};

pub const THREADS_ENV: &str = "STEIN_DENSITY_THREADS";

/// `STEIN_DENSITY_THREADS` if set to a positive integer, else the available
/// parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1))
}

/// [`stein_density_core::conditional::collect`] split over `workers`
/// threads in contiguous index ranges, assembled in index order. On failure
/// the error of the lowest failing range is returned.
pub fn collect_parallel(kernel: &SteinKernel<'_>, n: usize, seed: u64, workers: usize) -> Result<SampleBatch> {
    if n < MIN_SAMPLES {
        return Err(Error::Precondition(format!("collect needs at least {MIN_SAMPLES} samples, got {n}")));
    }
    let workers = workers.clamp(1, n);
    let chunk = n.div_ceil(workers) as u64;
    let ranges: Vec<_> = (0..workers as u64)
        .map(|w| (w * chunk).min(n as u64)..((w + 1) * chunk).min(n as u64))
        .filter(|r| !r.is_empty())
        .collect();
    let parts: Vec<Result<(Vec<f64>, Vec<f64>)>> = if ranges.len() == 1 {
        vec![collect_range(kernel, seed, ranges[0].clone())]
    } else {
        thread::scope(|s| {
            let handles: Vec<_> = ranges
                .iter()
                .cloned()
                .map(|r| s.spawn(move || collect_range(kernel, seed, r)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("worker panicked".into()))))
                .collect()
        })
    };
    let mut t = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for part in parts {
        let (pt, pth) = part?;
        t.extend(pt);
        theta.extend(pth);
    }
    SampleBatch::new(t, theta, seed)
}
