//! Decompositions `T - E[T] = h_1 + ... + h_m`.
//!
//! A decomposition is valid when the components sum to the centered
//! statistic and each `h_j` has zero mean in its active coordinate with the
//! other coordinates held fixed. Components come either from explicit
//! expressions or from the martingale construction
//! `h_k = E[T | X_1..X_k] - E[T | X_1..X_{k-1}]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::distributions::Distribution;
use crate::expressions::Expr;
use crate::quadrature::{integrate_pieces, GaussLegendre, Tolerance};
use crate::rng::Substream;
use crate::stats::{pairwise_sum, MeanEstimate};
use crate::{Error, Result};

/// Gauss-Legendre nodes per coordinate used when none is given.
pub const DEFAULT_QUAD_ORDER: usize = 32;
/// Product rules with more nodes than this switch to Monte Carlo.
pub const TENSOR_NODE_LIMIT: usize = 1 << 22;
/// Product rules over more coordinates than this switch to Monte Carlo.
pub const MAX_TENSOR_DIMS: usize = 6;
/// Draws for a Monte Carlo estimate of `E[T]`.
pub const MEAN_DRAWS: usize = 1_000_000;
/// Common random numbers shared by all Monte Carlo inner expectations.
pub const INNER_DRAWS: usize = 4096;

/// Whether a product rule of `order^dims` nodes is used.
pub fn tensor_feasible(dims: usize, order: usize) -> bool {
    dims <= MAX_TENSOR_DIMS && (order as f64).powi(dims as i32) <= TENSOR_NODE_LIMIT as f64
}

/// How an expectation was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Tensor { order: usize },
    MonteCarlo { draws: usize },
}

/// Probability-weighted quadrature nodes for one input law.
#[derive(Debug, Clone)]
struct NodeSet {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl NodeSet {
    /// `order` nodes over the quadrature range. On bounded supports they are
    /// split evenly across the panels between the law's break points (when
    /// there are few), so kinks at the median are integrated exactly.
    fn new(d: &Distribution, order: usize) -> Self {
        let (lo, hi) = d.quadrature_range();
        let mut cuts: Vec<f64> = d.breakpoints().into_iter().filter(|b| *b > lo && *b < hi).collect();
        if !d.support().is_bounded() || cuts.len() + 1 > order / 8 {
            cuts.clear();
        }
        let mut edges = vec![lo];
        edges.extend(cuts);
        edges.push(hi);
        let panels = edges.len() - 1;
        let gl = GaussLegendre::new(order / panels);
        let (mut x, mut w) = (Vec::new(), Vec::new());
        for e in edges.windows(2) {
            for (xi, wi) in gl.mapped(e[0], e[1]) {
                x.push(xi);
                w.push(wi * d.pdf(xi));
            }
        }
        let total = pairwise_sum(&w);
        for wi in &mut w {
            *wi /= total;
        }
        Self { x, w }
    }
}

fn node_sets(inputs: &[Distribution], order: usize) -> Vec<NodeSet> {
    inputs.iter().map(|d| NodeSet::new(d, order)).collect()
}

/// `E[T]` over coordinates `j..` with `buf[..j]` held fixed.
fn tensor_mean(expr: &Expr, nodes: &[NodeSet], buf: &mut [f64], j: usize) -> Result<f64> {
    if j == buf.len() {
        return expr.eval(buf);
    }
    let set = &nodes[j];
    let mut acc = 0.0;
    for (xi, wi) in set.x.iter().zip(&set.w) {
        buf[j] = *xi;
        acc += wi * tensor_mean(expr, nodes, buf, j + 1)?;
    }
    Ok(acc)
}

fn draw_point(inputs: &[Distribution], stream: &Substream, index: u64, out: &mut [f64]) {
    let mut rng = stream.at(index);
    for (xk, d) in out.iter_mut().zip(inputs) {
        *xk = d.sample(&mut rng);
    }
}

/// A statistic `T(x)` of independent inputs together with its mean.
#[derive(Debug, Clone)]
pub struct Statistic {
    expr: Expr,
    inputs: Vec<Distribution>,
    mean: f64,
    mean_se: f64,
    mean_method: Expectation,
}

impl Statistic {
    /// Computes `E[T]` by a product Gauss-Legendre rule when feasible and by
    /// Monte Carlo with `MEAN_DRAWS` draws from `seed` otherwise.
    pub fn new(expr: Expr, inputs: Vec<Distribution>, seed: u64) -> Result<Self> {
        Self::check(&expr, &inputs)?;
        let n = inputs.len();
        let (mean, mean_se, mean_method) = if tensor_feasible(n, DEFAULT_QUAD_ORDER) {
            let nodes = node_sets(&inputs, DEFAULT_QUAD_ORDER);
            let mut buf = vec![0.0; n];
            let m = tensor_mean(&expr, &nodes, &mut buf, 0)?;
            (m, 0.0, Expectation::Tensor { order: DEFAULT_QUAD_ORDER })
        } else {
            let stream = Substream::named(seed, "statistic-mean");
            let mut buf = vec![0.0; n];
            let mut values = Vec::with_capacity(MEAN_DRAWS);
            for i in 0..MEAN_DRAWS {
                draw_point(&inputs, &stream, i as u64, &mut buf);
                values.push(expr.eval(&buf).map_err(|e| e.at_sample(i as u64))?);
            }
            let est = MeanEstimate::of(&values);
            (est.mean, est.se, Expectation::MonteCarlo { draws: MEAN_DRAWS })
        };
        if !mean.is_finite() {
            return Err(Error::Numerical("E[T] is not finite".into()));
        }
        Ok(Self {
            expr,
            inputs,
            mean,
            mean_se,
            mean_method,
        })
    }

    /// Use a known mean instead of computing one.
    pub fn with_mean(expr: Expr, inputs: Vec<Distribution>, mean: f64) -> Result<Self> {
        Self::check(&expr, &inputs)?;
        Ok(Self {
            expr,
            inputs,
            mean,
            mean_se: 0.0,
            mean_method: Expectation::Tensor { order: 0 },
        })
    }

    fn check(expr: &Expr, inputs: &[Distribution]) -> Result<()> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput("a statistic needs at least one input".into()));
        }
        if let Some(k) = expr.max_variable() {
            if k >= inputs.len() {
                return Err(Error::Dimension {
                    index: k + 1,
                    dimension: inputs.len(),
                });
            }
        }
        Ok(())
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn inputs(&self) -> &[Distribution] {
        &self.inputs
    }

    pub fn dimension(&self) -> usize {
        self.inputs.len()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Zero unless the mean was estimated by Monte Carlo.
    pub fn mean_se(&self) -> f64 {
        self.mean_se
    }

    pub fn mean_method(&self) -> Expectation {
        self.mean_method
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.expr.eval(x)
    }

    /// `T(x) - E[T]`.
    pub fn centered(&self, x: &[f64]) -> Result<f64> {
        Ok(self.expr.eval(x)? - self.mean)
    }

    /// Draw one input vector; sample `index` of `stream`.
    pub fn draw(&self, stream: &Substream, index: u64, out: &mut [f64]) {
        draw_point(&self.inputs, stream, index, out);
    }
}

/// Value of a martingale component with the standard error of its inner
/// expectations (zero for product rules).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentValue {
    pub value: f64,
    pub se: f64,
}

/// Conditional expectations `E[T | X_1..X_j]` for the martingale
/// decomposition.
#[derive(Debug, Clone)]
pub struct Martingale {
    expr: Expr,
    n: usize,
    order: usize,
    nodes: Vec<NodeSet>,
    /// Row-major `INNER_DRAWS x n`, present when some prefix needs it.
    draws: Option<Vec<f64>>,
    mean: f64,
}

impl Martingale {
    pub fn new(stat: &Statistic, quad_order: usize, seed: u64) -> Result<Self> {
        if quad_order < 2 {
            return Err(Error::InvalidInput(format!("quadrature order {quad_order} is too small")));
        }
        let n = stat.dimension();
        let needs_mc = (1..n).any(|j| !tensor_feasible(n - j, quad_order));
        let draws = needs_mc.then(|| {
            let stream = Substream::named(seed, "martingale-inner");
            let mut flat = vec![0.0; INNER_DRAWS * n];
            for (i, row) in flat.chunks_mut(n).enumerate() {
                draw_point(stat.inputs(), &stream, i as u64, row);
            }
            flat
        });
        Ok(Self {
            expr: stat.expr().clone(),
            n,
            order: quad_order,
            nodes: node_sets(stat.inputs(), quad_order),
            draws,
            mean: stat.mean(),
        })
    }

    pub fn quad_order(&self) -> usize {
        self.order
    }

    /// How `E[T | X_1..X_j]` is computed.
    pub fn method(&self, j: usize) -> Expectation {
        if tensor_feasible(self.n - j, self.order) {
            Expectation::Tensor { order: self.order }
        } else {
            Expectation::MonteCarlo { draws: INNER_DRAWS }
        }
    }

    /// `E[T | X_1..X_j = buf[..j]]`; `buf` has length `n` and its tail is
    /// overwritten.
    pub fn conditional_mean(&self, buf: &mut [f64], j: usize) -> Result<ComponentValue> {
        if j == 0 {
            return Ok(ComponentValue {
                value: self.mean,
                se: 0.0,
            });
        }
        if j == self.n {
            return Ok(ComponentValue {
                value: self.expr.eval(buf)?,
                se: 0.0,
            });
        }
        match self.method(j) {
            Expectation::Tensor { .. } => Ok(ComponentValue {
                value: tensor_mean(&self.expr, &self.nodes, buf, j)?,
                se: 0.0,
            }),
            Expectation::MonteCarlo { .. } => {
                let draws = self.draws.as_ref().expect("inner draws exist when needed");
                let mut values = Vec::with_capacity(INNER_DRAWS);
                for row in draws.chunks(self.n) {
                    buf[j..].copy_from_slice(&row[j..]);
                    values.push(self.expr.eval(buf)?);
                }
                let est = MeanEstimate::of(&values);
                Ok(ComponentValue {
                    value: est.mean,
                    se: est.se,
                })
            }
        }
    }

    /// `h_k(x)` for a 0-based coordinate `k`.
    pub fn component(&self, k: usize, x: &[f64]) -> Result<ComponentValue> {
        let mut buf = x.to_vec();
        let upper = self.conditional_mean(&mut buf, k + 1)?;
        buf.copy_from_slice(x);
        let lower = self.conditional_mean(&mut buf, k)?;
        Ok(ComponentValue {
            value: upper.value - lower.value,
            se: (upper.se * upper.se + lower.se * lower.se).sqrt(),
        })
    }
}

/// Martingale component `h_k(x)` of `T` (1-based `k`) with inner
/// expectations at `quad_order` nodes per coordinate.
pub fn martingale_component(
    t: &Expr,
    dists: &[Distribution],
    k: usize,
    x: &[f64],
    quad_order: usize,
) -> Result<ComponentValue> {
    if k == 0 || k > dists.len() {
        return Err(Error::Dimension {
            index: k,
            dimension: dists.len(),
        });
    }
    if x.len() != dists.len() {
        return Err(Error::InvalidInput(format!("point has {} coordinates, expected {}", x.len(), dists.len())));
    }
    let stat = Statistic::new(t.clone(), dists.to_vec(), 0)?;
    Martingale::new(&stat, quad_order, 0)?.component(k - 1, x)
}

/// One explicit component `h_j`, absolutely continuous in coordinate
/// `active` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub expr: Expr,
    pub active: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Explicit,
    Martingale,
}

#[derive(Debug, Clone)]
pub enum Decomposition {
    Explicit(Vec<Component>),
    Martingale(Martingale),
}

/// Per-point cache of `E[T | X_1..X_k]`, `k = 0..=n`, reused by every
/// section through the same point.
#[derive(Debug, Clone, Default)]
pub struct PointMemo {
    base: Vec<f64>,
}

impl Decomposition {
    pub fn explicit(components: Vec<Component>, dimension: usize) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("a decomposition needs at least one component".into()));
        }
        for c in &components {
            if c.active >= dimension {
                return Err(Error::Dimension {
                    index: c.active + 1,
                    dimension,
                });
            }
            if let Some(k) = c.expr.max_variable() {
                if k >= dimension {
                    return Err(Error::Dimension { index: k + 1, dimension });
                }
            }
        }
        Ok(Self::Explicit(components))
    }

    pub fn martingale(stat: &Statistic, quad_order: usize, seed: u64) -> Result<Self> {
        Ok(Self::Martingale(Martingale::new(stat, quad_order, seed)?))
    }

    pub fn source(&self) -> Source {
        match self {
            Self::Explicit(_) => Source::Explicit,
            Self::Martingale(_) => Source::Martingale,
        }
    }

    /// Number of components `m`.
    pub fn len(&self) -> usize {
        match self {
            Self::Explicit(c) => c.len(),
            Self::Martingale(m) => m.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Active coordinate (0-based) of component `j`.
    pub fn active(&self, j: usize) -> usize {
        match self {
            Self::Explicit(c) => c[j].active,
            Self::Martingale(_) => j,
        }
    }

    /// Fill `memo` for sections through `x`.
    pub fn prepare(&self, x: &[f64], memo: &mut PointMemo) -> Result<()> {
        memo.base.clear();
        if let Self::Martingale(m) = self {
            let mut buf = x.to_vec();
            for j in 0..=m.n {
                buf.copy_from_slice(x);
                memo.base.push(m.conditional_mean(&mut buf, j)?.value);
            }
        }
        Ok(())
    }

    /// `h_j` at `x` with its active coordinate replaced by `y`. `memo` must
    /// have been prepared at `x`; `scratch` is any buffer.
    pub fn section(&self, j: usize, x: &[f64], memo: &PointMemo, y: f64, scratch: &mut Vec<f64>) -> Result<f64> {
        scratch.clear();
        scratch.extend_from_slice(x);
        match self {
            Self::Explicit(c) => {
                scratch[c[j].active] = y;
                c[j].expr.eval(scratch)
            }
            Self::Martingale(m) => {
                scratch[j] = y;
                Ok(m.conditional_mean(scratch, j + 1)?.value - memo.base[j])
            }
        }
    }

    /// `h_j(x)`.
    pub fn component_value(&self, j: usize, x: &[f64], memo: &PointMemo) -> Result<f64> {
        match self {
            Self::Explicit(c) => c[j].expr.eval(x),
            Self::Martingale(_) => Ok(memo.base[j + 1] - memo.base[j]),
        }
    }
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    /// `max |sum_j h_j(x) - (T(x) - E[T])|` over the samples.
    pub max_sum_residual: f64,
    /// `max |E_k[h_j]|` over components and conditioning points.
    pub max_centering: f64,
    pub centering_points: usize,
    /// Sample `E[h_j^2]` per component.
    pub second_moments: Vec<f64>,
    pub tolerance: f64,
    /// Allowance added to the sum check when `E[T]` is a Monte Carlo value.
    pub mean_allowance: f64,
    pub passed: bool,
}

impl ValidationReport {
    pub fn sum_ok(&self) -> bool {
        self.max_sum_residual <= self.tolerance + self.mean_allowance
    }

    pub fn centering_ok(&self) -> bool {
        self.max_centering <= self.tolerance
    }

    pub fn moments_ok(&self) -> bool {
        self.second_moments.iter().all(|m| m.is_finite())
    }
}

/// Number of conditioning points for the centering check.
pub const CENTERING_POINTS: usize = 100;

/// Check a decomposition of `stat` on `samples` random points.
pub fn validate(decomp: &Decomposition, stat: &Statistic, samples: usize, tol: f64, seed: u64) -> Result<ValidationReport> {
    if samples < 1000 {
        return Err(Error::Precondition(format!("validation needs at least 1000 samples, got {samples}")));
    }
    let n = stat.dimension();
    let m = decomp.len();
    let stream = Substream::named(seed, "validate");
    let quad = Tolerance::default();
    let mut x = vec![0.0; n];
    let mut memo = PointMemo::default();
    let mut scratch = Vec::with_capacity(n);
    let mut residual: f64 = 0.0;
    let mut centering: f64 = 0.0;
    let mut squares = vec![Vec::with_capacity(samples); m];
    for i in 0..samples {
        stat.draw(&stream, i as u64, &mut x);
        let wrap = |e: Error| e.at_sample(i as u64);
        decomp.prepare(&x, &mut memo).map_err(wrap)?;
        let t = stat.centered(&x).map_err(wrap)?;
        let mut total = 0.0;
        for (j, sq) in squares.iter_mut().enumerate() {
            let h = decomp.component_value(j, &x, &memo).map_err(wrap)?;
            total += h;
            sq.push(h * h);
        }
        residual = residual.max((total - t).abs());
        if i < CENTERING_POINTS {
            for j in 0..m {
                let d = &stat.inputs()[decomp.active(j)];
                let r = integrate_pieces(
                    |y| Ok(decomp.section(j, &x, &memo, y, &mut scratch)? * d.pdf(y)),
                    &d.breakpoints(),
                    &quad,
                )
                .map_err(wrap)?;
                centering = centering.max(r.value.abs());
            }
        }
    }
    let second_moments: Vec<f64> = squares.iter().map(|s| pairwise_sum(s) / samples as f64).collect();
    let mut report = ValidationReport {
        samples,
        max_sum_residual: residual,
        max_centering: centering,
        centering_points: CENTERING_POINTS.min(samples),
        second_moments,
        tolerance: tol,
        mean_allowance: 4.0 * stat.mean_se(),
        passed: false,
    };
    report.passed = report.sum_ok() && report.centering_ok() && report.moments_ok();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expressions::parse;
    use proptest::prelude::*;

    fn uniforms(n: usize) -> Vec<Distribution> {
        (0..n).map(|_| Distribution::uniform(0.0, 1.0).unwrap()).collect()
    }

    fn explicit(texts: &[(&str, usize)], n: usize) -> Decomposition {
        let comps = texts
            .iter()
            .map(|(t, k)| Component {
                expr: parse(t, n).unwrap(),
                active: *k,
            })
            .collect();
        Decomposition::explicit(comps, n).unwrap()
    }

    #[test]
    fn martingale_product_examples() {
        let t = parse("x1*x2", 2).unwrap();
        let d = uniforms(2);
        let h1 = martingale_component(&t, &d, 1, &[0.8, 0.3], 32).unwrap();
        assert!((h1.value - 0.15).abs() < 1e-12, "{h1:?}");
        let h2 = martingale_component(&t, &d, 2, &[0.8, 0.3], 32).unwrap();
        assert!((h2.value + 0.16).abs() < 1e-12, "{h2:?}");
        assert_eq!(h1.se, 0.0);
    }

    #[test]
    fn martingale_is_linear_for_linear_statistics() {
        let t = parse("2*x1 - 3*x2 + 0.5*x3", 3).unwrap();
        let d = vec![Distribution::std_normal(); 3];
        let x = [0.7, -1.2, 2.5];
        for (k, a) in [2.0, -3.0, 0.5].iter().enumerate() {
            let h = martingale_component(&t, &d, k + 1, &x, 32).unwrap();
            assert!((h.value - a * x[k]).abs() < 1e-8, "k={k}: {h:?}");
        }
    }

    #[test]
    fn explicit_curie_weiss_decomposition_passes() {
        let n = 3;
        let d = vec![Distribution::curie_weiss(2, 1.0).unwrap(); n];
        let t = parse("1*x1^4 + 2*x2^4 + 3*x3^4", n).unwrap();
        let stat = Statistic::new(t, d, 1).unwrap();
        let dec = explicit(&[("1*(x1^4 - 1)", 0), ("2*(x2^4 - 1)", 1), ("3*(x3^4 - 1)", 2)], n);
        let r = validate(&dec, &stat, 1000, 1e-6, 7).unwrap();
        assert!(r.passed, "{r:?}");
        assert!((stat.mean() - 6.0).abs() < 1e-8);
    }

    #[test]
    fn explicit_uniform_sum_passes_and_uncentered_fails() {
        let n = 3;
        let stat = Statistic::new(parse("x1 + x2 + x3", n).unwrap(), uniforms(n), 1).unwrap();
        let good = explicit(&[("x1 - 1/2", 0), ("x2 - 1/2", 1), ("x3 - 1/2", 2)], n);
        assert!(validate(&good, &stat, 1000, 1e-8, 3).unwrap().passed);
        let bad = explicit(&[("x1", 0), ("x2", 1), ("x3", 2)], n);
        let r = validate(&bad, &stat, 1000, 1e-8, 3).unwrap();
        assert!(!r.passed && !r.centering_ok());
        assert!((r.max_centering - 0.5).abs() < 1e-10);
    }

    #[test]
    fn martingale_validates_on_a_nonlinear_statistic() {
        let n = 3;
        let d = vec![
            Distribution::std_normal(),
            Distribution::uniform(-1.0, 2.0).unwrap(),
            Distribution::curie_weiss(2, 1.0).unwrap(),
        ];
        let stat = Statistic::new(parse("sin(x1)*x2 + x2^2*x3^2 + tanh(x1*x3)", n).unwrap(), d, 1).unwrap();
        let dec = Decomposition::martingale(&stat, 32, 1).unwrap();
        let r = validate(&dec, &stat, 1000, 1e-6, 11).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn additive_martingale_matches_centered_terms() {
        let n = 2;
        let d = vec![Distribution::std_normal(), Distribution::uniform(0.0, 2.0).unwrap()];
        let t = parse("x1^2 + exp(x2)", n).unwrap();
        let stat = Statistic::new(t.clone(), d.clone(), 1).unwrap();
        let m = Martingale::new(&stat, 32, 0).unwrap();
        let e2 = (2f64.exp() - 1.0) / 2.0;
        for x in [[0.3, 1.1], [-2.0, 0.1], [1.5, 1.9]] {
            let h1 = m.component(0, &x).unwrap().value;
            let h2 = m.component(1, &x).unwrap().value;
            assert!((h1 - (x[0] * x[0] - 1.0)).abs() < 1e-8);
            assert!((h2 - (x[1].exp() - e2)).abs() < 1e-8);
        }
    }

    #[test]
    fn wide_statistics_fall_back_to_monte_carlo() {
        let n = 8;
        let t = parse("sum(x1, x2, x3, x4, x5, x6, x7, x8)", n).unwrap();
        let stat = Statistic::new(t, uniforms(n), 5).unwrap();
        assert_eq!(stat.mean_method(), Expectation::MonteCarlo { draws: MEAN_DRAWS });
        assert!((stat.mean() - 4.0).abs() < 4.0 * stat.mean_se());
        let m = Martingale::new(&stat, 32, 5).unwrap();
        assert_eq!(m.method(1), Expectation::MonteCarlo { draws: INNER_DRAWS });
        assert_eq!(m.method(4), Expectation::Tensor { order: 32 });
        let h = m.component(0, &[0.9; 8]).unwrap();
        assert!(h.se > 0.0);
        assert!((h.value - 0.4).abs() < 4.0 * h.se + 4.0 * stat.mean_se());
    }

    #[test]
    fn explicit_rejects_bad_coordinates() {
        let e = parse("x1", 1).unwrap();
        assert!(Decomposition::explicit(vec![Component { expr: e, active: 3 }], 2).is_err());
        assert!(Statistic::new(parse("x3", 3).unwrap(), uniforms(2), 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn martingale_components_telescope(a in 0.1f64..3.0, b in -2.0f64..2.0, seed in 0u64..1000) {
            let n = 2;
            let d = vec![Distribution::std_normal(), Distribution::uniform(0.0, 1.0).unwrap()];
            let text = format!("{a}*x1^2*x2 + {b}*cos(x1) + x2^3");
            let stat = Statistic::new(parse(&text, n).unwrap(), d, seed).unwrap();
            let dec = Decomposition::martingale(&stat, 32, seed).unwrap();
            let mut x = [0.0; 2];
            let mut memo = PointMemo::default();
            let stream = Substream::named(seed, "prop");
            for i in 0..50 {
                stat.draw(&stream, i, &mut x);
                dec.prepare(&x, &mut memo).unwrap();
                let total = dec.component_value(0, &x, &memo).unwrap() + dec.component_value(1, &x, &memo).unwrap();
                prop_assert!((total - stat.centered(&x).unwrap()).abs() < 1e-10);
            }
        }
    }
}
