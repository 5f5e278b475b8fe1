//! Input laws for the coordinates `X_k`.
//!
//! Every law has a connected support, a density that is strictly positive
//! on the open support, and an accurate CDF in both tails. Unbounded laws
//! are integrated over their `[q(1e-12), q(1 - 1e-12)]` quantile range.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use num_traits::Float;

use crate::quadrature::{integrate, integrate_pieces, GaussLegendre, Tolerance};
use crate::rng::RandomStream;
use crate::stats::KahanSum;
use crate::{Error, Result};

/// Quantile level at which unbounded supports are truncated for quadrature.
pub const TAIL_TRUNCATION: f64 = 1e-12;

const CW_PANELS: usize = 2048;
const CW_QUANTILE_CELLS: usize = 2048;
// Outermost cells on each side that are inverted exactly instead of
// interpolated.
const CW_EXACT_TAIL_CELLS: usize = 16;

/// A connected interval `[lower, upper]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    lower: f64,
    upper: f64,
}

impl SupportInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidInput(format!(
                "support interval needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn real_line() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }
}

/// Parameters of a distribution, without cached tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionKind {
    Uniform { a: f64, b: f64 },
    StdNormal,
    CurieWeiss { s: u32, sigma: f64 },
    Tabulated { points: usize },
}

/// A univariate input law.
#[derive(Debug, Clone)]
pub struct Distribution {
    law: Law,
    support: SupportInterval,
    range: (f64, f64),
    normalizer: f64,
    mean: f64,
    median: f64,
}

#[derive(Debug, Clone)]
enum Law {
    Uniform { a: f64, b: f64 },
    StdNormal,
    CurieWeiss(Box<CurieWeissTables>),
    Tabulated(Tabulated),
}

impl Distribution {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!("uniform law needs finite a < b, got ({a}, {b})")));
        }
        Ok(Self {
            law: Law::Uniform { a, b },
            support: SupportInterval::new(a, b)?,
            range: (a, b),
            normalizer: 1.0 / (b - a),
            mean: 0.5 * (a + b),
            median: 0.5 * (a + b),
        })
    }

    pub fn std_normal() -> Self {
        let edge = normal_tail_inverse(TAIL_TRUNCATION);
        Self {
            law: Law::StdNormal,
            support: SupportInterval::real_line(),
            range: (-edge, edge),
            normalizer: 1.0 / (2.0 * PI).sqrt(),
            mean: 0.0,
            median: 0.0,
        }
    }

    /// The Curie-Weiss limit law `c_s exp(-x^{2s} / (2 s sigma^2))`.
    pub fn curie_weiss(s: u32, sigma: f64) -> Result<Self> {
        let tables = CurieWeissTables::build(s, sigma)?;
        let edge = tables.tail_inverse(TAIL_TRUNCATION);
        let normalizer = tables.normalizer;
        let mut d = Self {
            law: Law::CurieWeiss(Box::new(tables)),
            support: SupportInterval::real_line(),
            range: (-edge, edge),
            normalizer,
            mean: 0.0,
            median: 0.0,
        };
        if let Law::CurieWeiss(t) = &mut d.law {
            t.build_quantile_table(edge);
        }
        Ok(d)
    }

    /// Piecewise-linear density through `(grid[i], pdf[i])`, normalized to
    /// unit mass. Interior values must be strictly positive.
    pub fn tabulated(grid: Vec<f64>, pdf: Vec<f64>) -> Result<Self> {
        let table = Tabulated::new(grid, pdf)?;
        let (lo, hi) = (table.grid[0], table.grid[table.grid.len() - 1]);
        let mut d = Self {
            support: SupportInterval::new(lo, hi)?,
            range: (lo, hi),
            normalizer: table.normalizer,
            mean: 0.0,
            median: 0.0,
            law: Law::Tabulated(table),
        };
        d.median = d.quantile(0.5)?;
        d.mean = d.moment(1)?;
        let mass = d.total_mass()?;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::Numerical(format!("tabulated density integrates to {mass}")));
        }
        Ok(d)
    }

    pub fn kind(&self) -> DistributionKind {
        match &self.law {
            Law::Uniform { a, b } => DistributionKind::Uniform { a: *a, b: *b },
            Law::StdNormal => DistributionKind::StdNormal,
            Law::CurieWeiss(t) => DistributionKind::CurieWeiss { s: t.s, sigma: t.sigma },
            Law::Tabulated(t) => DistributionKind::Tabulated { points: t.grid.len() },
        }
    }

    pub fn support(&self) -> SupportInterval {
        self.support
    }

    /// Finite integration range; the support itself when bounded.
    pub fn quadrature_range(&self) -> (f64, f64) {
        self.range
    }

    /// Normalizing constant of the density (`1/(b-a)`, `c_s`, ...).
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn median(&self) -> f64 {
        self.median
    }

    /// Kinks of the density inside the quadrature range, plus its ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.law {
            Law::Tabulated(t) => t.grid.clone(),
            _ => alloc::vec![self.range.0, self.median, self.range.1],
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.law {
            Law::Uniform { a, b } => {
                if x >= *a && x <= *b {
                    self.normalizer
                } else {
                    0.0
                }
            }
            Law::StdNormal => self.normalizer * (-0.5 * x * x).exp(),
            Law::CurieWeiss(t) => self.normalizer * (-t.exponent(x)).exp(),
            Law::Tabulated(t) => t.pdf(x),
        }
    }

    /// Natural log of the density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match &self.law {
            Law::StdNormal => self.normalizer.ln() - 0.5 * x * x,
            Law::CurieWeiss(t) => self.normalizer.ln() - t.exponent(x),
            _ => self.pdf(x).ln(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match &self.law {
            Law::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Law::StdNormal => 0.5 * libm::erfc(-x / SQRT_2),
            Law::CurieWeiss(t) => {
                if x <= 0.0 {
                    t.tail(-x)
                } else {
                    1.0 - t.tail(x)
                }
            }
            Law::Tabulated(t) => t.cdf(x),
        }
    }

    /// Survival function `1 - F(x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match &self.law {
            Law::StdNormal => 0.5 * libm::erfc(x / SQRT_2),
            Law::CurieWeiss(t) => {
                if x >= 0.0 {
                    t.tail(x)
                } else {
                    1.0 - t.tail(-x)
                }
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level {u} is outside (0, 1)")));
        }
        Ok(match &self.law {
            Law::Uniform { a, b } => a + u * (b - a),
            Law::StdNormal => {
                if u < 0.5 {
                    -normal_tail_inverse(u)
                } else {
                    normal_tail_inverse(1.0 - u)
                }
            }
            Law::CurieWeiss(t) => {
                if u < 0.5 {
                    -t.tail_inverse(u)
                } else {
                    t.tail_inverse(1.0 - u)
                }
            }
            Law::Tabulated(t) => t.quantile(u),
        })
    }

    /// One draw by inversion; levels are clamped to the quadrature range.
    pub fn sample(&self, stream: &mut RandomStream) -> f64 {
        let u = stream.uniform().clamp(TAIL_TRUNCATION, 1.0 - TAIL_TRUNCATION);
        let x = match &self.law {
            Law::CurieWeiss(t) => t.table_quantile(u),
            _ => self.quantile(u).unwrap_or(self.median),
        };
        x.clamp(self.range.0, self.range.1)
    }

    /// `E[X^k]` by adaptive quadrature over the quadrature range.
    pub fn moment(&self, k: u32) -> Result<f64> {
        let tol = Tolerance::new(1e-12, 1e-10);
        let r = integrate_pieces(
            |x| Ok(x.powi(k as i32) * self.pdf(x)),
            &self.breakpoints(),
            &tol,
        )?;
        Ok(r.value)
    }

    /// Quadrature of the density over the quadrature range.
    pub fn total_mass(&self) -> Result<f64> {
        let tol = Tolerance::new(1e-13, 1e-12);
        Ok(integrate_pieces(|x| Ok(self.pdf(x)), &self.breakpoints(), &tol)?.value)
    }
}

/// Normalizing constant `c_s = 1 / int exp(-x^{2s} / (2 s sigma^2)) dx` by
/// adaptive quadrature.
pub fn normalizer(s: u32, sigma: f64) -> Result<f64> {
    check_curie_weiss(s, sigma)?;
    let scale = 2.0 * s as f64 * sigma * sigma;
    let half_width = curie_weiss_half_width(s, scale);
    let tol = Tolerance::new(1e-14, 1e-13);
    let half = integrate(
        |x| Ok((-(x.powi(2 * s as i32)) / scale).exp()),
        0.0,
        half_width,
        &tol,
    )
    .map_err(|e| Error::Numerical(format!("Curie-Weiss normalizer: {e}")))?;
    if !(half.value > 0.0) {
        return Err(Error::Numerical("Curie-Weiss normalizer is not positive".into()));
    }
    Ok(0.5 / half.value)
}

fn check_curie_weiss(s: u32, sigma: f64) -> Result<()> {
    if s == 0 || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "Curie-Weiss law needs s >= 1 and sigma > 0, got s = {s}, sigma = {sigma}"
        )));
    }
    Ok(())
}

// Beyond this point the unnormalized density is below f64::MIN_POSITIVE.
fn curie_weiss_half_width(s: u32, scale: f64) -> f64 {
    (745.0 * scale).powf(1.0 / (2.0 * s as f64))
}

/// Upper-tail inverse of the standard normal for `p` in `(0, 0.5]`.
fn normal_tail_inverse(p: f64) -> f64 {
    if p >= 0.5 {
        return 0.0;
    }
    // Abramowitz-Stegun 26.2.23 start, then bracketed Newton on ln(tail).
    let t = (-2.0 * p.ln()).sqrt();
    let guess = t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
        / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    let tail = |y: f64| 0.5 * libm::erfc(y / SQRT_2);
    let density = |y: f64| (-0.5 * y * y).exp() / (2.0 * PI).sqrt();
    invert_tail(tail, density, p, 0.0, 40.0, guess.max(0.0))
}

/// Solve `tail(y) = p` for a decreasing `tail` on `[lo, hi]` with
/// `-tail' = density`.
fn invert_tail<T, D>(tail: T, density: D, p: f64, mut lo: f64, mut hi: f64, guess: f64) -> f64
where
    T: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let target = p.ln();
    let mut y = guess.clamp(lo, hi);
    for _ in 0..200 {
        let q = tail(y);
        if q == p {
            return y;
        }
        if q > p {
            lo = y;
        } else {
            hi = y;
        }
        let d = density(y);
        let mut next = if q > 0.0 && d > 0.0 {
            y + (q.ln() - target) * q / d
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0) || hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            return next;
        }
        y = next;
    }
    y
}

#[derive(Debug, Clone)]
struct CurieWeissTables {
    s: u32,
    sigma: f64,
    scale: f64,
    normalizer: f64,
    edges: Vec<f64>,
    // upper[i] = P(X >= edges[i]); upper[0] = 1/2.
    upper: Vec<f64>,
    rule: GaussLegendre,
    q_nodes: Vec<f64>,
    q_slopes: Vec<f64>,
}

impl CurieWeissTables {
    fn build(s: u32, sigma: f64) -> Result<Self> {
        check_curie_weiss(s, sigma)?;
        let normalizer = normalizer(s, sigma)?;
        let scale = 2.0 * s as f64 * sigma * sigma;
        let width = curie_weiss_half_width(s, scale);
        let rule = GaussLegendre::new(15);
        let edges: Vec<f64> = (0..=CW_PANELS)
            .map(|i| width * i as f64 / CW_PANELS as f64)
            .collect();
        let g = |x: f64| (-(x.powi(2 * s as i32)) / scale).exp();
        let masses: Vec<f64> = edges.windows(2).map(|w| rule.integrate(g, w[0], w[1])).collect();
        let mut upper = alloc::vec![0.0; CW_PANELS + 1];
        let mut acc = KahanSum::default();
        for i in (0..CW_PANELS).rev() {
            acc.add(masses[i]);
            upper[i] = acc.value();
        }
        let half = upper[0];
        for u in &mut upper {
            *u *= 0.5 / half;
        }
        Ok(Self {
            s,
            sigma,
            scale,
            normalizer,
            edges,
            upper,
            rule,
            q_nodes: Vec::new(),
            q_slopes: Vec::new(),
        })
    }

    fn exponent(&self, x: f64) -> f64 {
        x.powi(2 * self.s as i32) / self.scale
    }

    fn density(&self, x: f64) -> f64 {
        self.normalizer * (-self.exponent(x)).exp()
    }

    /// `P(X >= y)` for `y >= 0`.
    fn tail(&self, y: f64) -> f64 {
        let width = self.edges[CW_PANELS];
        if y >= width {
            return 0.0;
        }
        let i = ((y / width * CW_PANELS as f64) as usize).min(CW_PANELS - 1);
        let partial = self.rule.integrate(|x| self.density(x), y, self.edges[i + 1]);
        partial + self.upper[i + 1]
    }

    /// Solve `P(X >= y) = p` for `p` in `(0, 1/2]`.
    fn tail_inverse(&self, p: f64) -> f64 {
        if p >= 0.5 {
            return 0.0;
        }
        // upper is decreasing: first index with upper[i] <= p
        let i = self.upper.partition_point(|&u| u > p);
        let (lo, hi) = (self.edges[i.saturating_sub(1)], self.edges[i.min(CW_PANELS)]);
        invert_tail(|y| self.tail(y), |y| self.density(y), p, lo, hi, 0.5 * (lo + hi))
    }

    fn build_quantile_table(&mut self, edge: f64) {
        let cells = CW_QUANTILE_CELLS;
        let mut nodes = alloc::vec![0.0; cells + 1];
        let mut slopes = alloc::vec![0.0; cells + 1];
        nodes[0] = -edge;
        nodes[cells] = edge;
        for j in 1..cells {
            let u = j as f64 / cells as f64;
            let x = if u < 0.5 {
                -self.tail_inverse(u)
            } else {
                self.tail_inverse(1.0 - u)
            };
            nodes[j] = x;
            slopes[j] = 1.0 / self.density(x);
        }
        self.q_nodes = nodes;
        self.q_slopes = slopes;
    }

    /// Quantile from the cached table: monotone cubic Hermite in the
    /// interior cells, exact inversion in the outermost cells.
    fn table_quantile(&self, u: f64) -> f64 {
        let cells = CW_QUANTILE_CELLS;
        let pos = u * cells as f64;
        let j = (pos as usize).min(cells - 1);
        if j < CW_EXACT_TAIL_CELLS {
            return -self.tail_inverse(u);
        }
        if j >= cells - CW_EXACT_TAIL_CELLS {
            return self.tail_inverse(1.0 - u);
        }
        let h = 1.0 / cells as f64;
        let (x0, x1) = (self.q_nodes[j], self.q_nodes[j + 1]);
        let secant = (x1 - x0) / h;
        let (mut m0, mut m1) = (self.q_slopes[j], self.q_slopes[j + 1]);
        // Fritsch-Carlson limiter keeps the cell monotone.
        let (a, b) = (m0 / secant, m1 / secant);
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m0 = tau * a * secant;
            m1 = tau * b * secant;
        }
        let t = pos - j as f64;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * x0 + h10 * h * m0 + h01 * x1 + h11 * h * m1
    }
}

#[derive(Debug, Clone)]
struct Tabulated {
    grid: Vec<f64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    normalizer: f64,
}

impl Tabulated {
    fn new(grid: Vec<f64>, pdf: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != pdf.len() {
            return Err(Error::InvalidInput(
                "tabulated law needs at least two grid points and one density value per point".into(),
            ));
        }
        if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("tabulated grid must be finite and strictly ascending".into()));
        }
        if pdf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput("tabulated density values must be finite and nonnegative".into()));
        }
        if let Some(i) = (1..pdf.len() - 1).find(|&i| pdf[i] <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "tabulated density vanishes at interior point x = {}; the density must be positive on the open support",
                grid[i]
            )));
        }
        if pdf.len() == 2 && pdf[0] <= 0.0 && pdf[1] <= 0.0 {
            return Err(Error::InvalidInput("tabulated density is identically zero".into()));
        }
        let mass = crate::quadrature::trapezoid(&grid, &pdf);
        let pdf: Vec<f64> = pdf.iter().map(|p| p / mass).collect();
        let mut cdf = crate::quadrature::cumulative_trapezoid(&grid, &pdf);
        let last = cdf.len() - 1;
        cdf[last] = 1.0;
        Ok(Self {
            grid,
            pdf,
            cdf,
            normalizer: 1.0 / mass,
        })
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.grid.partition_point(|&g| g <= x);
        i.saturating_sub(1).min(self.grid.len() - 2)
    }

    fn pdf(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x < self.grid[0] || x > self.grid[n - 1] {
            return 0.0;
        }
        let i = self.segment(x);
        let t = (x - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        self.pdf[i] + t * (self.pdf[i + 1] - self.pdf[i])
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return 1.0;
        }
        let i = self.segment(x);
        let d = x - self.grid[i];
        let slope = (self.pdf[i + 1] - self.pdf[i]) / (self.grid[i + 1] - self.grid[i]);
        (self.cdf[i] + self.pdf[i] * d + 0.5 * slope * d * d).clamp(0.0, 1.0)
    }

    fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).saturating_sub(1).min(self.grid.len() - 2);
        let width = self.grid[i + 1] - self.grid[i];
        let slope = (self.pdf[i + 1] - self.pdf[i]) / width;
        let r = u - self.cdf[i];
        let f = self.pdf[i];
        let d = if slope.abs() * width < 1e-12 * f.max(f64::MIN_POSITIVE) {
            r / f
        } else {
            let disc = (f * f + 2.0 * slope * r).max(0.0);
            2.0 * r / (f + disc.sqrt())
        };
        (self.grid[i] + d.clamp(0.0, width)).min(self.grid[i + 1])
    }
}
