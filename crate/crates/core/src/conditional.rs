//! Monte Carlo pairs `(T, Theta)` and the binned estimate of
//! `theta(t) = E[Theta | T = t]`.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Float;

use crate::rng::Substream;
use crate::stats::pairwise_sum_map;
use crate::stein::SteinKernel;
use crate::{Error, Result};

/// Smallest batch accepted by [`collect`].
pub const MIN_SAMPLES: usize = 10_000;
/// Smallest number of bins accepted by [`estimate_theta`].
pub const MIN_BINS: usize = 5;
/// Smallest average bin occupancy accepted by [`estimate_theta`].
pub const MIN_PER_BIN: usize = 50;

/// Paired draws of the centered statistic and the Stein kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub t_values: Vec<f64>,
    pub theta_values: Vec<f64>,
    pub seed: u64,
}

impl SampleBatch {
    pub fn new(t_values: Vec<f64>, theta_values: Vec<f64>, seed: u64) -> Result<Self> {
        if t_values.len() != theta_values.len() {
            return Err(Error::InvalidInput(format!(
                "{} statistic values but {} kernel values",
                t_values.len(),
                theta_values.len()
            )));
        }
        if let Some(i) = t_values.iter().chain(&theta_values).position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("entry {} of the batch is not finite", i % t_values.len().max(1))));
        }
        Ok(Self {
            t_values,
            theta_values,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_values.is_empty()
    }

    /// Order statistics of `T` at levels `delta` and `1 - delta`.
    pub fn central_range(&self, delta: f64) -> (f64, f64) {
        let mut t = self.t_values.clone();
        t.sort_by(f64::total_cmp);
        let last = t.len() - 1;
        let lo = (delta * last as f64).floor() as usize;
        let hi = ((1.0 - delta) * last as f64).ceil() as usize;
        (t[lo.min(last)], t[hi.min(last)])
    }
}

/// The stream every sample of `collect` is drawn from.
pub fn collect_stream(seed: u64) -> Substream {
    Substream::named(seed, "collect")
}

/// Samples `range` of the batch for `seed`. Sample `i` depends only on
/// `(seed, i)`, so ranges can be computed separately and concatenated.
pub fn collect_range(kernel: &SteinKernel<'_>, seed: u64, range: Range<u64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let stream = collect_stream(seed);
    let n = (range.end - range.start) as usize;
    let mut t = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    let mut x = alloc::vec![0.0; kernel.statistic().dimension()];
    for i in range {
        let (ti, th) = kernel.sample(&stream, i, &mut x).map_err(|e| e.at_sample(i))?;
        if !(ti.is_finite() && th.is_finite()) {
            return Err(Error::Numerical(format!("sample {i} is not finite")).at_sample(i));
        }
        t.push(ti);
        theta.push(th);
    }
    Ok((t, theta))
}

/// `n` paired draws for `seed`.
pub fn collect(kernel: &SteinKernel<'_>, n: usize, seed: u64) -> Result<SampleBatch> {
    if n < MIN_SAMPLES {
        return Err(Error::Precondition(format!("collect needs at least {MIN_SAMPLES} samples, got {n}")));
    }
    let (t, theta) = collect_range(kernel, seed, 0..n as u64)?;
    SampleBatch::new(t, theta, seed)
}

/// `floor(sqrt(n) / 5)` clamped to `[10, 200]`.
pub fn default_bins(n: usize) -> usize {
    (((n as f64).sqrt() / 5.0).floor() as usize).clamp(10, 200)
}

/// Equal-count binned regression of `Theta` on `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalEstimate {
    /// `B + 1` ascending edges from `min T` to `max T`.
    pub bin_edges: Vec<f64>,
    /// Mean of `T` within each bin; the interpolation nodes of `evaluate`.
    pub bin_centers: Vec<f64>,
    /// Bin means with negative values clipped to zero.
    pub bin_means: Vec<f64>,
    pub raw_means: Vec<f64>,
    pub bin_se: Vec<f64>,
    pub counts: Vec<usize>,
    /// Bins whose raw mean was negative.
    pub clipped: Vec<bool>,
}

/// Bin `batch` into about `bins` equal-count bins.
///
/// Bin boundaries never split tied values of `T`, so an atom of `T` ends
/// up in a single bin and fewer than `bins` bins may be returned.
pub fn estimate_theta(batch: &SampleBatch, bins: usize) -> Result<ConditionalEstimate> {
    let n = batch.len();
    if bins < MIN_BINS {
        return Err(Error::Precondition(format!("at least {MIN_BINS} bins are needed, got {bins}")));
    }
    if n < bins * MIN_PER_BIN {
        return Err(Error::Precondition(format!(
            "{n} samples give fewer than {MIN_PER_BIN} per bin for {bins} bins"
        )));
    }
    let t = &batch.t_values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));
    let (tmin, tmax) = (t[order[0]], t[order[n - 1]]);
    if tmin == tmax {
        return Err(Error::Degenerate { count: n, value: tmin });
    }

    let mut bounds = alloc::vec![0usize];
    for b in 1..bins {
        let mut cut = (b * n + bins / 2) / bins;
        while cut < n && t[order[cut]] == t[order[cut - 1]] {
            cut += 1;
        }
        if cut < n && cut > *bounds.last().unwrap() {
            bounds.push(cut);
        }
    }
    bounds.push(n);

    let nb = bounds.len() - 1;
    let mut est = ConditionalEstimate {
        bin_edges: Vec::with_capacity(nb + 1),
        bin_centers: Vec::with_capacity(nb),
        bin_means: Vec::with_capacity(nb),
        raw_means: Vec::with_capacity(nb),
        bin_se: Vec::with_capacity(nb),
        counts: Vec::with_capacity(nb),
        clipped: Vec::with_capacity(nb),
    };
    est.bin_edges.push(tmin);
    let theta = &batch.theta_values;
    for w in bounds.windows(2) {
        let (s, e) = (w[0], w[1]);
        let c = e - s;
        let mean = pairwise_sum_map(c, |i| theta[order[s + i]]) / c as f64;
        let se = if c > 1 {
            let ss = pairwise_sum_map(c, |i| {
                let d = theta[order[s + i]] - mean;
                d * d
            });
            (ss / (c - 1) as f64 / c as f64).sqrt()
        } else {
            0.0
        };
        est.bin_centers.push(pairwise_sum_map(c, |i| t[order[s + i]]) / c as f64);
        est.raw_means.push(mean);
        est.bin_means.push(mean.max(0.0));
        est.clipped.push(mean < 0.0);
        est.bin_se.push(se);
        est.counts.push(c);
        est.bin_edges.push(if e < n { 0.5 * (t[order[e - 1]] + t[order[e]]) } else { tmax });
    }
    Ok(est)
}

impl ConditionalEstimate {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `(lo + hi) / 2` of each bin.
    pub fn edge_midpoints(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn any_clipped(&self) -> bool {
        self.clipped.iter().any(|&c| c)
    }

    /// Count-weighted mean of the raw bin means.
    pub fn global_mean(&self) -> f64 {
        let total = self.total_count() as f64;
        pairwise_sum_map(self.bins(), |b| self.counts[b] as f64 * self.raw_means[b]) / total
    }

    /// Bins holding the central `mass` fraction of the samples, by position
    /// in the cumulative count.
    pub fn central_bins(&self, mass: f64) -> Range<usize> {
        let total = self.total_count() as f64;
        let tail = 0.5 * (1.0 - mass) * total;
        let mut acc = 0.0;
        let mut start = 0;
        let mut end = self.bins();
        for (b, &c) in self.counts.iter().enumerate() {
            let before = acc;
            acc += c as f64;
            if before < tail {
                start = b + 1;
            }
            if acc > total - tail && end == self.bins() {
                end = b;
            }
        }
        start.min(end)..end
    }

    /// Piecewise-linear `theta(t)` through the bin centers, with the
    /// interpolated standard error; constant beyond the outer centers.
    ///
    /// The centers are within-bin means of `T` rather than edge midpoints:
    /// a bin mean of `Theta` estimates `theta` at the centroid to second
    /// order, while the edge midpoint is biased wherever the density of `T`
    /// varies across the bin.
    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        let mids = &self.bin_centers;
        let last = mids.len() - 1;
        if !(t > mids[0]) {
            return (self.bin_means[0], self.bin_se[0]);
        }
        if t >= mids[last] {
            return (self.bin_means[last], self.bin_se[last]);
        }
        let j = mids.partition_point(|&m| m <= t);
        let (a, b) = (j - 1, j);
        let w = (t - mids[a]) / (mids[b] - mids[a]);
        (
            self.bin_means[a] + w * (self.bin_means[b] - self.bin_means[a]),
            self.bin_se[a] + w * (self.bin_se[b] - self.bin_se[a]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{Component, Decomposition, Statistic};
    use crate::distributions::Distribution;
    use crate::expressions::parse;
    use alloc::vec;
    use proptest::prelude::*;

    fn batch_from(t: Vec<f64>, theta: Vec<f64>) -> SampleBatch {
        SampleBatch::new(t, theta, 0).unwrap()
    }

    #[test]
    fn constant_kernel_gives_flat_estimate() {
        let n = 5000;
        let t: Vec<f64> = (0..n).map(|i| (i as f64 * 0.618).sin()).collect();
        let est = estimate_theta(&batch_from(t, vec![5.0; n]), 20).unwrap();
        assert_eq!(est.bins(), 20);
        assert!(est.bin_means.iter().all(|&m| m == 5.0));
        assert!(est.bin_se.iter().all(|&s| s == 0.0));
        assert_eq!(est.evaluate(0.3), (5.0, 0.0));
        assert_eq!(est.evaluate(1e9), (5.0, 0.0));
    }

    #[test]
    fn interpolation_and_clamping() {
        let est = ConditionalEstimate {
            bin_edges: vec![-0.5, 0.5, 1.5],
            bin_centers: vec![0.0, 1.0],
            bin_means: vec![1.0, 3.0],
            raw_means: vec![1.0, 3.0],
            bin_se: vec![0.1, 0.3],
            counts: vec![10, 10],
            clipped: vec![false, false],
        };
        let (v, s) = est.evaluate(0.5);
        assert!((v - 2.0).abs() < 1e-15 && (s - 0.2).abs() < 1e-15);
        assert_eq!(est.evaluate(100.0), (3.0, 0.3));
        assert_eq!(est.evaluate(-100.0), (1.0, 0.1));
    }

    #[test]
    fn preconditions_and_degeneracy() {
        let b = batch_from(vec![1.0; 1000], vec![0.0; 1000]);
        assert!(matches!(estimate_theta(&b, 10), Err(Error::Degenerate { count: 1000, .. })));
        assert!(matches!(estimate_theta(&b, 4), Err(Error::Precondition(_))));
        assert!(matches!(estimate_theta(&b, 30), Err(Error::Precondition(_))));
        assert!(SampleBatch::new(vec![1.0], vec![], 0).is_err());
        assert!(SampleBatch::new(vec![f64::NAN], vec![1.0], 0).is_err());
    }

    #[test]
    fn ties_stay_in_one_bin() {
        let n = 4000;
        let t: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 + i as f64 / n as f64 }).collect();
        let theta: Vec<f64> = t.iter().map(|&v| if v == 0.0 { 0.0 } else { v }).collect();
        let est = estimate_theta(&batch_from(t, theta), 20).unwrap();
        assert_eq!(est.counts[0], n / 2);
        assert_eq!(est.raw_means[0], 0.0);
        assert_eq!(est.total_count(), n);
    }

    #[test]
    fn default_bin_rule() {
        assert_eq!(default_bins(100), 10);
        assert_eq!(default_bins(250_000), 100);
        assert_eq!(default_bins(10_000_000), 200);
    }

    #[test]
    fn squared_normal_kernel_is_recovered() {
        let stat = Statistic::new(parse("x1^2", 1).unwrap(), vec![Distribution::std_normal()], 0).unwrap();
        let dec = Decomposition::explicit(
            vec![Component {
                expr: parse("x1^2 - 1", 1).unwrap(),
                active: 0,
            }],
            1,
        )
        .unwrap();
        let k = SteinKernel::new(&stat, &dec).unwrap();
        let batch = collect(&k, 20_000, 4).unwrap();
        for (t, th) in batch.t_values.iter().zip(&batch.theta_values) {
            assert!((th - 2.0 * (t + 1.0)).abs() < 1e-7 * (1.0 + th));
        }
        let est = estimate_theta(&batch, 20).unwrap();
        for b in est.central_bins(0.9) {
            let exact = 2.0 * (est.bin_centers[b] + 1.0);
            assert!((est.bin_means[b] - exact).abs() < 3.0 * est.bin_se[b], "bin {b}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn bins_partition_and_preserve_totals(seed in 0u64..10_000, bins in 5usize..40, ties in 0usize..4) {
            let n = 3000;
            let s = Substream::named(seed, "prop");
            let t: Vec<f64> = (0..n).map(|i| {
                let u = s.at(i as u64).uniform();
                if ties > 0 { (u * 10.0 * ties as f64).floor() } else { u }
            }).collect();
            let theta: Vec<f64> = (0..n).map(|i| s.at(i as u64 + n as u64).uniform() - 0.2).collect();
            let b = batch_from(t.clone(), theta.clone());
            let est = estimate_theta(&b, bins).unwrap();
            prop_assert_eq!(est.total_count(), n);
            prop_assert!(est.bin_edges.windows(2).all(|w| w[0] < w[1]));
            for (b, c) in est.bin_centers.iter().enumerate() {
                prop_assert!(est.bin_edges[b] <= *c && *c <= est.bin_edges[b + 1]);
            }
            let tmin = t.iter().cloned().fold(f64::INFINITY, f64::min);
            let tmax = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(est.bin_edges[0], tmin);
            prop_assert_eq!(*est.bin_edges.last().unwrap(), tmax);
            let direct = pairwise_sum_map(n, |i| theta[i]) / n as f64;
            prop_assert!((est.global_mean() - direct).abs() < 1e-12);
            for (m, r) in est.bin_means.iter().zip(&est.raw_means) {
                prop_assert!(*m >= 0.0 && (*m == *r || *r < 0.0));
            }
            let (v, _) = est.evaluate(0.5 * (tmin + tmax));
            prop_assert!(v >= 0.0);
        }
    }
}
