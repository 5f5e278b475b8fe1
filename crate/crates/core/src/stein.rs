//! The covariance kernel `F(x ^ y) - F(x)F(y)`, the operator `L` and the
//! Stein kernel `Theta = sum_j d_k T * L_k h_j`.
//!
//! For a centered `h` the operator has the one-integral form
//! `L h(x) = int_x^b h(y) p(y) dy / p(x)`. It is evaluated on the shorter
//! tail (the lower one when `F(x) < 1/2`, using `E[h] = 0`) with the
//! density ratio formed in log space, so it stays finite far into the
//! tails where `p(x)` underflows.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::conditional::{collect, SampleBatch};
use crate::decomposition::{Decomposition, PointMemo, Statistic};
use crate::distributions::Distribution;
use crate::expressions::Expr;
use crate::quadrature::{integrate_pieces, Integral, Tolerance};
use crate::rng::Substream;
use crate::stats::{pairwise_sum_map, MeanEstimate};
use crate::{Error, Result};

/// Largest `|E[h]|` accepted by the integration-by-parts form.
pub const CENTERING_TOLERANCE: f64 = 1e-8;
/// Densities below this are treated as zero by the double-integral form.
pub const MIN_DENSITY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMethod {
    /// `int (F(x ^ y) - F(x)F(y)) h'(y) dy / p(x)`, split at `x`.
    DoubleIntegral,
    /// `int_x^b h(y) p(y) dy / p(x)`; requires `E[h] = 0`.
    Ibp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEvaluation {
    pub x: f64,
    pub value: f64,
    pub method: KernelMethod,
    pub est_error: f64,
}

/// Break points of `d` strictly inside `(a, b)`, framed by `a` and `b`.
fn pieces(d: &Distribution, a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![a];
    out.extend(d.breakpoints().into_iter().filter(|&p| p > a && p < b));
    out.push(b);
    out
}

/// Log-density drop beyond which a tail is ignored.
const TAIL_LOG_RATIO: f64 = 60.0;

/// End of the integration interval from `x` in direction `dir`: the
/// support bound if finite, else the first point past the quadrature range
/// where the density has fallen by `exp(-TAIL_LOG_RATIO)` relative to `x`.
fn tail_end(d: &Distribution, x: f64, dir: f64) -> f64 {
    let (lo, hi) = d.quadrature_range();
    let support = d.support();
    let bound = if dir > 0.0 { support.upper() } else { support.lower() };
    if bound.is_finite() {
        return bound;
    }
    let lnpx = d.ln_pdf(x);
    let mut y = if dir > 0.0 { hi.max(x) } else { lo.min(x) };
    let mut step = (hi - lo) / 64.0;
    for _ in 0..200 {
        if !(d.ln_pdf(y) - lnpx > -TAIL_LOG_RATIO) {
            break;
        }
        y += dir * step;
        step *= 1.5;
    }
    y
}

/// `int_x^b f(y) p(y) dy / p(x)` for `f` with `E[f(X)] = 0`.
pub fn centered_transform<F>(d: &Distribution, mut f: F, x: f64, tol: &Tolerance) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let lnpx = d.ln_pdf(x);
    if !lnpx.is_finite() {
        return Err(Error::SupportBoundary { x });
    }
    let mut integrand = |y: f64| {
        let w = (d.ln_pdf(y) - lnpx).exp();
        if w == 0.0 {
            Ok(0.0)
        } else {
            Ok(f(y)? * w)
        }
    };
    if d.cdf(x) < 0.5 {
        let r = integrate_pieces(&mut integrand, &pieces(d, tail_end(d, x, -1.0), x), tol)?;
        Ok(Integral { value: -r.value, ..r })
    } else {
        integrate_pieces(&mut integrand, &pieces(d, x, tail_end(d, x, 1.0)), tol)
    }
}

/// `int (F(x ^ y) - F(x)F(y)) g(y) dy`, as
/// `S(x) int_a^x F g + F(x) int_x^b S g`.
fn kernel_integral<G>(d: &Distribution, mut g: G, x: f64, tol: &Tolerance) -> Result<Integral>
where
    G: FnMut(f64) -> Result<f64>,
{
    let (lo, hi) = (tail_end(d, x, -1.0), tail_end(d, x, 1.0));
    let (fx, sx) = (d.cdf(x), d.sf(x));
    let left = if x > lo {
        integrate_pieces(|y| Ok(d.cdf(y) * g(y)?), &pieces(d, lo, x), tol)?
    } else {
        Integral { value: 0.0, error: 0.0, evaluations: 0 }
    };
    let right = if x < hi {
        integrate_pieces(|y| Ok(d.sf(y) * g(y)?), &pieces(d, x, hi), tol)?
    } else {
        Integral { value: 0.0, error: 0.0, evaluations: 0 }
    };
    Ok(Integral {
        value: sx * left.value + fx * right.value,
        error: sx * left.error + fx * right.error,
        evaluations: left.evaluations + right.evaluations,
    })
}

/// `L h(x)` for a function `h` of one variable.
pub fn l_op(d: &Distribution, h: &Expr, x: f64, method: KernelMethod) -> Result<KernelEvaluation> {
    l_op_with(d, h, x, method, &Tolerance::default())
}

pub fn l_op_with(d: &Distribution, h: &Expr, x: f64, method: KernelMethod, tol: &Tolerance) -> Result<KernelEvaluation> {
    let (value, est_error) = match method {
        KernelMethod::Ibp => {
            let (lo, hi) = d.quadrature_range();
            let mean = integrate_pieces(|y| Ok(h.eval1(y)? * d.pdf(y)), &pieces(d, lo, hi), tol)?;
            if mean.value.abs() >= CENTERING_TOLERANCE {
                return Err(Error::Precondition(format!(
                    "integration by parts needs a centered h, but E[h] = {:e}",
                    mean.value
                )));
            }
            let r = centered_transform(d, |y| h.eval1(y), x, tol)?;
            (r.value, r.error)
        }
        KernelMethod::DoubleIntegral => {
            let px = d.pdf(x);
            if !(px >= MIN_DENSITY) {
                return Err(Error::SupportBoundary { x });
            }
            let r = kernel_integral(d, |y| Ok(h.eval1_dual(y)?.deriv), x, tol)?;
            (r.value / px, r.error / px)
        }
    };
    Ok(KernelEvaluation {
        x,
        value,
        method,
        est_error,
    })
}

/// `Cov(alpha(X), beta(X))` from the double integral of the covariance
/// kernel against `alpha'(x) beta'(y)`.
pub fn cuadras_cov(d: &Distribution, alpha: &Expr, beta: &Expr) -> Result<Integral> {
    let inner = Tolerance::new(1e-12, 1e-10);
    let outer = Tolerance::default();
    let (lo, hi) = d.quadrature_range();
    integrate_pieces(
        |x| {
            let da = alpha.eval1_dual(x)?.deriv;
            if da == 0.0 {
                return Ok(0.0);
            }
            let k = kernel_integral(d, |y| Ok(beta.eval1_dual(y)?.deriv), x, &inner)?;
            Ok(da * k.value)
        },
        &pieces(d, lo, hi),
        &outer,
    )
    .map_err(|e| match e {
        Error::Numerical(m) => Error::Numerical(format!("covariance integral diverges: {m}")),
        Error::Quadrature { .. } => Error::Numerical(format!("covariance integral diverges: {e}")),
        e => e,
    })
}

/// Monte Carlo covariance of `alpha(X)` and `beta(X)` with its standard
/// error.
pub fn mc_covariance(d: &Distribution, alpha: &Expr, beta: &Expr, draws: usize, seed: u64) -> Result<MeanEstimate> {
    let stream = Substream::named(seed, "covariance");
    let mut a = Vec::with_capacity(draws);
    let mut b = Vec::with_capacity(draws);
    for i in 0..draws {
        let x = d.sample(&mut stream.at(i as u64));
        a.push(alpha.eval1(x).map_err(|e| e.at_sample(i as u64))?);
        b.push(beta.eval1(x).map_err(|e| e.at_sample(i as u64))?);
    }
    let n = draws as f64;
    let ma = pairwise_sum_map(draws, |i| a[i]) / n;
    let mb = pairwise_sum_map(draws, |i| b[i]) / n;
    let est = MeanEstimate::of_map(draws, |i| (a[i] - ma) * (b[i] - mb));
    Ok(MeanEstimate {
        mean: est.mean * n / (n - 1.0),
        ..est
    })
}

/// `Theta(x)` for a statistic and a decomposition of it.
pub fn theta_sample(stat: &Statistic, decomp: &Decomposition, x: &[f64]) -> Result<f64> {
    SteinKernel::new(stat, decomp)?.theta(x)
}

/// Statistic, decomposition and quadrature settings needed to evaluate
/// `Theta`.
#[derive(Debug, Clone, Copy)]
pub struct SteinKernel<'a> {
    stat: &'a Statistic,
    decomp: &'a Decomposition,
    tol: Tolerance,
}

impl<'a> SteinKernel<'a> {
    pub fn new(stat: &'a Statistic, decomp: &'a Decomposition) -> Result<Self> {
        let n = stat.dimension();
        for j in 0..decomp.len() {
            if decomp.active(j) >= n {
                return Err(Error::Dimension {
                    index: decomp.active(j) + 1,
                    dimension: n,
                });
            }
        }
        Ok(Self {
            stat,
            decomp,
            tol: Tolerance::default(),
        })
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn statistic(&self) -> &'a Statistic {
        self.stat
    }

    pub fn decomposition(&self) -> &'a Decomposition {
        self.decomp
    }

    /// `Theta(x)`. Components whose active coordinate does not move `T` at
    /// `x` are skipped.
    pub fn theta(&self, x: &[f64]) -> Result<f64> {
        let (stat, decomp) = (self.stat, self.decomp);
        let mut memo = PointMemo::default();
        decomp.prepare(x, &mut memo)?;
        let mut scratch = Vec::with_capacity(x.len());
        let mut total = 0.0;
        for j in 0..decomp.len() {
            let k = decomp.active(j);
            let dt = stat.expr().eval_dual(x, k)?.deriv;
            if dt == 0.0 {
                continue;
            }
            if !dt.is_finite() {
                return Err(Error::Numerical(format!("d{}T is not finite", k + 1)));
            }
            let d = &stat.inputs()[k];
            let l = centered_transform(d, |y| decomp.section(j, x, &memo, y, &mut scratch), x[k], &self.tol)?;
            total += dt * l.value;
        }
        Ok(total)
    }

    /// Sample `index`: the pair `(T(X) - E[T], Theta(X))`.
    pub fn sample(&self, stream: &Substream, index: u64, x: &mut [f64]) -> Result<(f64, f64)> {
        self.stat.draw(stream, index, x);
        let t = self.stat.centered(x)?;
        Ok((t, self.theta(x)?))
    }
}

/// Both sides of `E[g(T) T] = E[g'(T) Theta]` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub samples: usize,
    pub passed: bool,
}

impl IdentityReport {
    pub fn difference(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    /// `3 (SE_lhs + SE_rhs)`.
    pub fn threshold(&self) -> f64 {
        3.0 * (self.lhs_se + self.rhs_se)
    }
}

/// Identity check from collected pairs.
pub fn identity_from_batch(batch: &SampleBatch, g: &Expr) -> Result<IdentityReport> {
    let n = batch.len();
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for (i, (&t, &th)) in batch.t_values.iter().zip(&batch.theta_values).enumerate() {
        let gv = g.eval1_dual(t).map_err(|e| e.at_sample(i as u64))?;
        lhs.push(gv.value * t);
        rhs.push(if gv.deriv == 0.0 { 0.0 } else { gv.deriv * th });
    }
    let l = MeanEstimate::of(&lhs);
    let r = MeanEstimate::of(&rhs);
    let mut report = IdentityReport {
        lhs: l.mean,
        lhs_se: l.se,
        rhs: r.mean,
        rhs_se: r.se,
        samples: n,
        passed: false,
    };
    report.passed = report.difference() <= report.threshold();
    Ok(report)
}

/// Monte Carlo check of the Stein identity with `samples` draws.
pub fn stein_identity_check(kernel: &SteinKernel<'_>, g: &Expr, samples: usize, seed: u64) -> Result<IdentityReport> {
    identity_from_batch(&collect(kernel, samples, seed)?, g)
}
