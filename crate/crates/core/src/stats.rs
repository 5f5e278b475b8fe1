//! Reductions with a fixed summation order.

use num_traits::Float;

/// Pairwise (tree) summation; the reduction order depends only on the
/// length of the slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut s = 0.0;
        for &v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(values[i])` without allocating.
pub fn pairwise_sum_map<F: Fn(usize) -> f64 + Copy>(len: usize, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64 + Copy>(lo: usize, hi: usize, f: F) -> f64 {
        if hi - lo <= 32 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            return s;
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, len, f)
}

/// Compensated (Kahan-Babuska) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl MeanEstimate {
    /// Mean of `f(i)` for `i in 0..len`, with the standard error from the
    /// unbiased sample variance.
    pub fn of_map<F: Fn(usize) -> f64 + Copy>(len: usize, f: F) -> Self {
        if len == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                count: 0,
            };
        }
        let n = len as f64;
        let mean = pairwise_sum_map(len, f) / n;
        let se = if len > 1 {
            let ss = pairwise_sum_map(len, |i| {
                let d = f(i) - mean;
                d * d
            });
            (ss / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            se,
            count: len,
        }
    }

    pub fn of(values: &[f64]) -> Self {
        Self::of_map(values.len(), |i| values[i])
    }
}
