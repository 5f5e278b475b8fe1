//! Existence verdicts and density reconstruction from `theta`.
//!
//! With `T` centered, `p(x) = c / theta(x) * exp(-int_0^x u / theta(u) du)`
//! on the support, and conversely `theta = phi / p` with the upper partial
//! moment `phi(x) = int_x^b y p(y) dy`.
//!
//! Grid densities are piecewise linear between nodes. A node may appear
//! twice in a row to encode a jump: the first copy carries the left limit,
//! the second the right limit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::conditional::ConditionalEstimate;
use crate::distributions::SupportInterval;
use crate::quadrature::{integrate_pieces, trapezoid, Tolerance};
use crate::reference::irwin_hall_pdf;
use crate::{Error, Result};

/// Smallest bin count for which a bin with `|mean| <= SE` rejects.
pub const REJECT_MIN_COUNT: usize = 500;
/// Densities at or below this are masked when forming `phi / p`.
pub const MASK_DENSITY: f64 = 1e-12;
/// Allowed deviation of a density's mass from one.
pub const MASS_TOLERANCE: f64 = 1e-6;
/// Allowed `|E[T]|` for [`phi_and_theta_from_density`].
pub const MEAN_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Supported,
    Rejected,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Supported => "supported",
            Verdict::Rejected => "rejected",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Evidence on whether `theta(T) > 0` almost surely. These are statistical
/// evidence levels from finitely many samples, not proofs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceVerdict {
    pub verdict: Verdict,
    /// Merged `t`-intervals of flagged bins.
    pub zero_regions: Vec<(f64, f64)>,
    /// Per bin: mean not clearly positive.
    pub flagged: Vec<bool>,
    /// Fraction of samples in flagged bins.
    pub mass_at_risk: f64,
}

/// A bin is flagged unless its raw mean exceeds both `3 SE` and
/// `1e-10` times the global mean. Any flagged bin with `|mean| <= SE` and at
/// least [`REJECT_MIN_COUNT`] samples rejects; other flags leave the
/// verdict inconclusive.
pub fn check_existence(est: &ConditionalEstimate) -> ExistenceVerdict {
    let global = est.global_mean();
    let flagged: Vec<bool> = (0..est.bins())
        .map(|b| {
            let (m, se) = (est.raw_means[b], est.bin_se[b]);
            !(m > 3.0 * se && m > 1e-10 * global)
        })
        .collect();
    let mut zero_regions: Vec<(f64, f64)> = Vec::new();
    let mut at_risk = 0usize;
    let mut reject = false;
    for (b, &f) in flagged.iter().enumerate() {
        if !f {
            continue;
        }
        at_risk += est.counts[b];
        if est.raw_means[b].abs() <= est.bin_se[b] && est.counts[b] >= REJECT_MIN_COUNT {
            reject = true;
        }
        let (lo, hi) = (est.bin_edges[b], est.bin_edges[b + 1]);
        match zero_regions.last_mut() {
            Some(last) if b > 0 && flagged[b - 1] => last.1 = hi,
            _ => zero_regions.push((lo, hi)),
        }
    }
    let verdict = if at_risk == 0 {
        Verdict::Supported
    } else if reject {
        Verdict::Rejected
    } else {
        Verdict::Inconclusive
    };
    ExistenceVerdict {
        verdict,
        zero_regions,
        flagged,
        mass_at_risk: at_risk as f64 / est.total_count() as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// A normalized density on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub pdf_values: Vec<f64>,
    pub support: SupportInterval,
    /// Normalizing constant of the representation formula; 1 for densities
    /// built from data.
    pub c: f64,
    /// Added to the grid to return to the un-centered coordinates of `T`.
    pub center_shift: f64,
    /// Set when `theta` was raised to the floor of [`reconstruct`].
    pub theta_floored: bool,
}

impl DensityEstimate {
    /// Normalize nonnegative values on a nondecreasing grid by trapezoid.
    pub fn from_values(grid: Vec<f64>, values: Vec<f64>, center_shift: f64) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidInput("a grid density needs matching grid and values of length >= 2".into()));
        }
        if grid.windows(3).any(|w| w[0] > w[1] || w[1] > w[2] || (w[0] == w[1] && w[1] == w[2])) || grid[0] > grid[1] {
            return Err(Error::InvalidInput("grid must be nondecreasing with at most doubled nodes".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("density values must be finite and nonnegative".into()));
        }
        let mass = trapezoid(&grid, &values);
        if !(mass > 0.0) {
            return Err(Error::InvalidInput("density has no mass on its grid".into()));
        }
        let pdf_values = values.iter().map(|v| v / mass).collect();
        let support = SupportInterval::new(grid[0], grid[grid.len() - 1])?;
        Ok(Self {
            grid,
            pdf_values,
            support,
            c: 1.0,
            center_shift,
            theta_floored: false,
        })
    }

    /// Frequency polygon of `values` over `bins` equal-width bins, shifted so
    /// its mean is zero (the shift goes to `center_shift`).
    pub fn frequency_polygon(values: &[f64], bins: usize) -> Result<Self> {
        if bins < 2 || values.len() < 2 {
            return Err(Error::InvalidInput("a frequency polygon needs at least two bins and two values".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::Degenerate { count: values.len(), value: lo });
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0.0; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1.0;
        }
        let mut grid = Vec::with_capacity(bins + 2);
        let mut dens = Vec::with_capacity(bins + 2);
        grid.push(lo);
        dens.push(counts[0] / (values.len() as f64 * width));
        for (b, c) in counts.iter().enumerate() {
            grid.push(lo + (b as f64 + 0.5) * width);
            dens.push(c / (values.len() as f64 * width));
        }
        grid.push(hi);
        dens.push(counts[bins - 1] / (values.len() as f64 * width));
        Ok(Self::from_values(grid, dens, 0.0)?.recentered())
    }

    pub fn with_shift(mut self, center_shift: f64) -> Self {
        self.center_shift = center_shift;
        self
    }

    /// Move the grid by the density's own mean so that it is centered,
    /// folding the mean into `center_shift`. The support moves with it.
    pub fn recentered(mut self) -> Self {
        let m = self.mean();
        for g in &mut self.grid {
            *g -= m;
        }
        if let Ok(s) = SupportInterval::new(self.support.lower() - m, self.support.upper() - m) {
            self.support = s;
        }
        self.center_shift += m;
        self
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.pdf_values)
    }

    /// Mean of the piecewise-linear density (exact for the interpolant).
    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.grid.len() {
            let (a, b) = (self.grid[i - 1], self.grid[i]);
            let (fa, fb) = (self.pdf_values[i - 1], self.pdf_values[i]);
            acc += (b - a) * (fa * (2.0 * a + b) + fb * (a + 2.0 * b)) / 6.0;
        }
        acc
    }

    fn eval_side(&self, x: f64, side: Side) -> f64 {
        let g = &self.grid;
        let f = &self.pdf_values;
        let last = g.len() - 1;
        if !(x >= g[0] && x <= g[last]) {
            return 0.0;
        }
        match side {
            Side::Left => {
                if x == g[0] {
                    return 0.0;
                }
                let j = g.partition_point(|&v| v < x);
                if g[j] == x {
                    f[j]
                } else {
                    lerp(g[j - 1], f[j - 1], g[j], f[j], x)
                }
            }
            Side::Right => {
                if x == g[last] {
                    return 0.0;
                }
                let j = g.partition_point(|&v| v <= x) - 1;
                if g[j] == x {
                    f[j]
                } else {
                    lerp(g[j], f[j], g[j + 1], f[j + 1], x)
                }
            }
        }
    }

    /// Density at `x` in centered coordinates; right limit at jumps and 0
    /// off the grid.
    pub fn pdf(&self, x: f64) -> f64 {
        let last = self.grid.len() - 1;
        if x == self.grid[last] {
            self.pdf_values[last]
        } else if x == self.grid[0] {
            self.eval_side(x, Side::Right).max(self.pdf_values[0])
        } else {
            self.eval_side(x, Side::Right)
        }
    }

    /// Density of the un-centered statistic at `x`.
    pub fn pdf_shifted(&self, x: f64) -> f64 {
        self.pdf(x - self.center_shift)
    }

    /// Grid in un-centered coordinates.
    pub fn shifted_grid(&self) -> Vec<f64> {
        self.grid.iter().map(|g| g + self.center_shift).collect()
    }
}

fn lerp(x0: f64, y0: f64, x1: f64, y1: f64, x: f64) -> f64 {
    if x1 == x0 {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Trapezoid `int_0^x g` on `grid` (which contains 0 at `zero`), for every
/// node.
fn cumulative_from(grid: &[f64], g: &[f64], zero: usize) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for i in zero + 1..grid.len() {
        out[i] = out[i - 1] + 0.5 * (g[i - 1] + g[i]) * (grid[i] - grid[i - 1]);
    }
    for i in (0..zero).rev() {
        out[i] = out[i + 1] - 0.5 * (g[i] + g[i + 1]) * (grid[i + 1] - grid[i]);
    }
    out
}

/// `grid_size` equally spaced nodes on `[lo, hi]` with 0 added if absent.
/// Returns the grid and the index of 0.
pub fn reconstruction_grid(lo: f64, hi: f64, grid_size: usize) -> Result<(Vec<f64>, usize)> {
    if !(lo < 0.0 && hi > 0.0) {
        return Err(Error::Precondition(format!(
            "reconstruction range [{lo}, {hi}] must contain 0 in its interior"
        )));
    }
    if grid_size < 3 {
        return Err(Error::InvalidInput("reconstruction needs at least 3 grid points".into()));
    }
    let step = (hi - lo) / (grid_size - 1) as f64;
    let mut grid: Vec<f64> = (0..grid_size).map(|i| lo + step * i as f64).collect();
    grid[grid_size - 1] = hi;
    let zero = grid.partition_point(|&x| x < 0.0);
    if grid[zero] != 0.0 {
        grid.insert(zero, 0.0);
    }
    Ok((grid, zero))
}

/// Density of the centered statistic from `theta` on `[lo, hi]`.
///
/// `theta` is raised to `max(1e-10, 0.01 * median)` of its grid values
/// (flagged in `theta_floored`); a non-positive value is an existence error.
pub fn reconstruct<F: Fn(f64) -> f64>(theta: F, range: (f64, f64), grid_size: usize) -> Result<DensityEstimate> {
    reconstruct_with_floor(theta, range, grid_size, None)
}

/// As [`reconstruct`], with the floor taken relative to `typical` (e.g. the
/// median of `theta(T)` over samples) instead of the grid median.
pub fn reconstruct_with_floor<F: Fn(f64) -> f64>(
    theta: F,
    range: (f64, f64),
    grid_size: usize,
    typical: Option<f64>,
) -> Result<DensityEstimate> {
    let (grid, zero) = reconstruction_grid(range.0, range.1, grid_size)?;
    let mut th = Vec::with_capacity(grid.len());
    for &x in &grid {
        let v = theta(x);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Existence { t: x, value: v });
        }
        th.push(v);
    }
    let median = typical.unwrap_or_else(|| {
        let mut sorted = th.clone();
        sorted.sort_by(f64::total_cmp);
        sorted[sorted.len() / 2]
    });
    let floor = (0.01 * median).max(1e-10);
    let floored = th.iter().any(|&v| v < floor);
    for v in &mut th {
        *v = v.max(floor);
    }
    let g: Vec<f64> = grid.iter().zip(&th).map(|(u, t)| u / t).collect();
    let integral = cumulative_from(&grid, &g, zero);
    let logs: Vec<f64> = th.iter().zip(&integral).map(|(t, i)| -t.ln() - i).collect();
    let lmax = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let q: Vec<f64> = logs.iter().map(|l| (l - lmax).exp()).collect();
    let z = trapezoid(&grid, &q);
    let ln_c = -lmax - z.ln();
    let mut p = DensityEstimate::from_values(grid, q, 0.0)?;
    p.c = ln_c.exp();
    p.theta_floored = floored;
    Ok(p)
}

/// Two-sided envelopes on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelopes {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// `c / theta_hi * exp(-int_0^x u / theta_lo)` and
/// `c / theta_lo * exp(-int_0^x u / theta_hi)` on `grid`, integrals by
/// trapezoid as in [`reconstruct`].
pub fn bounds<L, H>(theta_lo: L, theta_hi: H, grid: &[f64], c: f64) -> Result<Envelopes>
where
    L: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    let mut full = grid.to_vec();
    let zero = full.partition_point(|&x| x < 0.0);
    let inserted = full.get(zero) != Some(&0.0);
    if inserted {
        full.insert(zero, 0.0);
    }
    let mut lo = Vec::with_capacity(full.len());
    let mut hi = Vec::with_capacity(full.len());
    for &x in &full {
        let (a, b) = (theta_lo(x), theta_hi(x));
        if !(a > 0.0) {
            return Err(Error::InvalidInput(format!("lower theta bound {a} at {x} is not positive")));
        }
        if a > b {
            return Err(Error::InvalidInput(format!("theta bounds cross at {x}: {a} > {b}")));
        }
        lo.push(a);
        hi.push(b);
    }
    let g_lo: Vec<f64> = full.iter().zip(&lo).map(|(u, t)| u / t).collect();
    let g_hi: Vec<f64> = full.iter().zip(&hi).map(|(u, t)| u / t).collect();
    let i_lo = cumulative_from(&full, &g_lo, zero);
    let i_hi = cumulative_from(&full, &g_hi, zero);
    let ln_c = c.ln();
    let mut env = Envelopes {
        grid: Vec::with_capacity(grid.len()),
        lower: Vec::with_capacity(grid.len()),
        upper: Vec::with_capacity(grid.len()),
    };
    for i in 0..full.len() {
        if inserted && i == zero {
            continue;
        }
        env.grid.push(full[i]);
        env.lower.push((ln_c - hi[i].ln() - i_lo[i]).exp());
        env.upper.push((ln_c - lo[i].ln() - i_hi[i]).exp());
    }
    Ok(env)
}

/// `phi` (cumulative trapezoid of `y p`, from the nearer end) and
/// `theta = phi / p` on the grid of a centered density.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTheta {
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    /// `None` where `p <= 1e-12`.
    pub theta: Vec<Option<f64>>,
}

pub fn phi_and_theta_from_density(p: &DensityEstimate) -> Result<PhiTheta> {
    let mass = p.mass();
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Precondition(format!("density mass {mass} is not 1")));
    }
    let mean = p.mean();
    if mean.abs() > MEAN_TOLERANCE {
        return Err(Error::Precondition(format!(
            "density mean {mean} is not 0; center it first"
        )));
    }
    let (g, f) = (&p.grid, &p.pdf_values);
    let n = g.len();
    let piece = |i: usize| 0.5 * (g[i] * f[i] + g[i + 1] * f[i + 1]) * (g[i + 1] - g[i]);
    let mut right = vec![0.0; n];
    for i in (0..n - 1).rev() {
        right[i] = right[i + 1] + piece(i);
    }
    // Left of 0 use the equivalent `-int_a^x y p` (exact for a centered p),
    // which keeps the far left tail free of cancellation.
    let mut left = vec![0.0; n];
    for i in 1..n {
        left[i] = left[i - 1] + piece(i - 1);
    }
    let phi: Vec<f64> = (0..n)
        .map(|i| if g[i] < 0.0 { -left[i] } else { right[i] })
        .collect();
    let theta = phi
        .iter()
        .zip(f)
        .map(|(ph, pv)| (*pv > MASK_DENSITY).then(|| ph / pv))
        .collect();
    Ok(PhiTheta {
        grid: g.clone(),
        phi,
        theta,
    })
}

/// `int_x^b y p(y) dy / p(x)` for a grid density (exact for the
/// piecewise-linear interpolant).
pub fn conditional_identity_rhs(p: &DensityEstimate, x: f64) -> Result<f64> {
    let px = p.pdf(x);
    if !(px > 0.0) {
        return Err(Error::SupportBoundary { x });
    }
    let (g, f) = (&p.grid, &p.pdf_values);
    let start = g.partition_point(|&v| v <= x);
    let moment = |a: f64, fa: f64, b: f64, fb: f64| (b - a) * (fa * (2.0 * a + b) + fb * (a + 2.0 * b)) / 6.0;
    let mut acc = 0.0;
    if start < g.len() {
        acc += moment(x, px, g[start], f[start]);
        for i in start + 1..g.len() {
            acc += moment(g[i - 1], f[i - 1], g[i], f[i]);
        }
    }
    Ok(acc / px)
}

/// `x - 2 int_x^n (y - n/2) p_Z(y) dy / p_Z(x)` for the Irwin-Hall density
/// `p_Z` of a sum of `n` uniforms, in un-centered coordinates.
pub fn irwin_hall_identity_rhs(n: u32, x: f64) -> Result<f64> {
    let pz = irwin_hall_pdf(n, x)?;
    if !(pz > 0.0) {
        return Err(Error::SupportBoundary { x });
    }
    let nf = n as f64;
    let tol = Tolerance::new(1e-14, 1e-12);
    let integrand = |y: f64| Ok((y - 0.5 * nf) * irwin_hall_pdf(n, y)?);
    let tail = if x >= 0.5 * nf {
        let mut breaks = vec![x];
        breaks.extend((1..n).map(|k| k as f64).filter(|&k| k > x));
        breaks.push(nf);
        integrate_pieces(integrand, &breaks, &tol)?.value
    } else {
        let mut breaks = vec![0.0];
        breaks.extend((1..n).map(|k| k as f64).filter(|&k| k < x));
        breaks.push(x);
        -integrate_pieces(integrand, &breaks, &tol)?.value
    };
    Ok(x - 2.0 * tail / pz)
}

/// Pointwise mixture `sum_i w_i p_i` of grid densities on the union grid,
/// keeping jumps at component edges.
pub fn discrete_mixture(cases: &[(f64, &DensityEstimate)]) -> Result<DensityEstimate> {
    if cases.is_empty() {
        return Err(Error::InvalidInput("a mixture needs at least one component".into()));
    }
    if cases.iter().any(|(w, _)| !(*w > 0.0)) {
        return Err(Error::InvalidInput("mixture probabilities must be positive".into()));
    }
    let total: f64 = cases.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("mixture probabilities sum to {total}, not 1")));
    }
    let mut nodes: Vec<f64> = cases.iter().flat_map(|(_, p)| p.grid.iter().copied()).collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut grid = Vec::with_capacity(nodes.len() + 8);
    let mut values = Vec::with_capacity(nodes.len() + 8);
    let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
    for &v in &nodes {
        let left: f64 = cases.iter().map(|(w, p)| w * p.eval_side(v, Side::Left)).sum();
        let right: f64 = cases.iter().map(|(w, p)| w * p.eval_side(v, Side::Right)).sum();
        if v == first {
            grid.push(v);
            values.push(right);
        } else if v == last {
            grid.push(v);
            values.push(left);
        } else if (left - right).abs() > 1e-12 * left.abs().max(right.abs()) {
            grid.extend([v, v]);
            values.extend([left, right]);
        } else {
            grid.push(v);
            values.push(left.max(right));
        }
    }
    let shift = cases[0].1.center_shift;
    let mut p = DensityEstimate::from_values(grid, values, shift)?;
    let mass_before = p.mass();
    if (mass_before - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Numerical(format!("mixture mass {mass_before} after renormalization")));
    }
    p.c = 1.0;
    Ok(p)
}

/// `int |p - q|` over the grid of `p` plus the mass of `q` off that grid.
pub fn l1_distance<Q: Fn(f64) -> f64>(p: &DensityEstimate, q: Q) -> f64 {
    let qv: Vec<f64> = p.grid.iter().map(|&x| q(x)).collect();
    let diff: Vec<f64> = p.pdf_values.iter().zip(&qv).map(|(a, b)| (a - b).abs()).collect();
    let inside = trapezoid(&p.grid, &qv);
    trapezoid(&p.grid, &diff) + (1.0 - inside).max(0.0)
}

/// `max |p - q|` over the grid of `p`.
pub fn linf_distance<Q: Fn(f64) -> f64>(p: &DensityEstimate, q: Q) -> f64 {
    p.grid
        .iter()
        .zip(&p.pdf_values)
        .map(|(&x, v)| (v - q(x)).abs())
        .fold(0.0, f64::max)
}
