//! Numerical integration.
//!
//! [`integrate`] is a globally adaptive Gauss-Kronrod scheme: each panel is
//! evaluated with the 15-point Kronrod extension of the 7-point
//! Gauss-Legendre rule, and the panel with the largest error estimate is
//! bisected until the summed estimate meets the tolerance.
//! [`GaussLegendre`] provides fixed rules of any order for tensor-product
//! expectations.

use alloc::format;
use alloc::vec::Vec;
use num_traits::Float;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Absolute and relative targets for an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Upper bound on the number of panels before giving up.
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-8,
            max_panels: 2000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    splittable: bool,
}

fn kronrod15<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();
    let fc = finite(f(center)?, center)?;
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let x1 = center - dx;
        let x2 = center + dx;
        let f1 = finite(f(x1)?, x1)?;
        let f2 = finite(f(x2)?, x2)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    resabs *= abs_half;
    resasc *= abs_half;
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    let splittable = abs_half > 1e3 * f64::EPSILON * center.abs().max(f64::MIN_POSITIVE);
    Ok(Panel {
        a,
        b,
        value,
        error,
        splittable,
    })
}

fn finite(v: f64, x: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("integrand is not finite at x = {x:e}")))
    }
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: &Tolerance) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_pieces(f, &[a, b], tol)
}

/// Integrate `f` over `[breaks[0], breaks[last]]`, starting from one panel
/// per consecutive pair of break points. Kinks of the integrand should be
/// listed as breaks.
pub fn integrate_pieces<F>(mut f: F, breaks: &[f64], tol: &Tolerance) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    if breaks.len() < 2 {
        return Err(Error::InvalidInput("integration needs at least two break points".into()));
    }
    let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidInput(format!("integration bounds [{lo}, {hi}] must be finite")));
    }
    if lo > hi {
        let reversed: Vec<f64> = breaks.iter().rev().copied().collect();
        let r = integrate_pieces(f, &reversed, tol)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }
    let mut panels: Vec<Panel> = Vec::with_capacity(64);
    for w in breaks.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidInput("break points must be monotone".into()));
        }
        if w[1] > w[0] {
            panels.push(kronrod15(&mut f, w[0], w[1])?);
        }
    }
    let mut evaluations = 15 * panels.len();
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= tol.target(value) {
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable)
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i);
        let Some(worst) = worst else {
            return Err(Error::Quadrature { a: lo, b: hi, error });
        };
        if panels.len() >= tol.max_panels {
            return Err(Error::Quadrature { a: lo, b: hi, error });
        }
        let p = panels[worst];
        let mid = 0.5 * (p.a + p.b);
        panels[worst] = kronrod15(&mut f, p.a, mid)?;
        panels.push(kronrod15(&mut f, mid, p.b)?);
        evaluations += 30;
    }
}

/// Infallible-integrand convenience wrapper around [`integrate`].
pub fn integrate_fn<F>(mut f: F, a: f64, b: f64, tol: &Tolerance) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Ok(f(x)), a, b, tol)
}

/// Fixed Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights of the `order`-point rule, ascending in the node.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut z = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// The rule mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (c + h * t, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Cumulative trapezoid `int_{x_0}^{x_i} y dx` on a (possibly nonuniform)
/// grid; the first entry is zero.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    if !x.is_empty() {
        out.push(0.0);
    }
    for i in 1..x.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
        out.push(acc);
    }
    out
}

/// Trapezoid integral of tabulated values.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (yw[0] + yw[1]) * (xw[1] - xw[0]))
        .sum()
}
