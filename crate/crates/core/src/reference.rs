//! Closed-form densities and identities used as oracles.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use num_traits::Float;

use crate::distributions::SupportInterval;
use crate::rng::Substream;
use crate::stats::{KahanSum, MeanEstimate};
use crate::{Error, Result};

/// Largest Irwin-Hall order evaluated; beyond it the alternating sum loses
/// too many digits.
pub const IRWIN_HALL_MAX_N: u32 = 25;
/// Half-width of the conditioning window of [`uif_lhs_oracle`].
pub const UIF_WINDOW: f64 = 0.01;

/// Density of the sum of `n` independent `U(0, 1)` variables.
pub fn irwin_hall_pdf(n: u32, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("Irwin-Hall order must be positive".into()));
    }
    if n > IRWIN_HALL_MAX_N {
        return Err(Error::Numerical(format!(
            "Irwin-Hall order {n} exceeds {IRWIN_HALL_MAX_N}; the alternating sum cancels catastrophically"
        )));
    }
    let nf = n as f64;
    if !(x >= 0.0 && x <= nf) || x.is_nan() {
        return Ok(0.0);
    }
    if n == 1 {
        return Ok(if x < 1.0 { 1.0 } else { 0.0 });
    }
    // The density is symmetric about n/2; the short side cancels less.
    let y = if x > 0.5 * nf { nf - x } else { x };
    let top = (y.floor() as u32).min(n);
    let mut sum = KahanSum::default();
    let mut binom = 1.0;
    for k in 0..=top {
        let term = binom * (y - k as f64).powi(n as i32 - 1);
        sum.add(if k % 2 == 0 { term } else { -term });
        binom = binom * (nf - k as f64) / (k as f64 + 1.0);
    }
    let fact: f64 = (1..n).map(|k| k as f64).product();
    Ok((sum.value() / fact).max(0.0))
}

/// Chi-square density with `k > 0` degrees of freedom. At `x = 0` with
/// `k < 2` the density diverges and `f64::MAX` is returned; see
/// [`chi_square_diverges`].
pub fn chi_square_pdf(k: f64, x: f64) -> f64 {
    if !(k > 0.0) || x.is_nan() || x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if k < 2.0 {
            f64::MAX
        } else if k == 2.0 {
            0.5
        } else {
            0.0
        };
    }
    let h = 0.5 * k;
    let ln = (h - 1.0) * x.ln() - 0.5 * x - h * core::f64::consts::LN_2 - libm::lgamma(h);
    ln.exp().min(f64::MAX)
}

/// Whether [`chi_square_pdf`] returned its divergence value at `x`.
pub fn chi_square_diverges(k: f64, x: f64) -> bool {
    k > 0.0 && k < 2.0 && x == 0.0
}

pub fn normal_pdf(var: f64, x: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * PI * var).sqrt()
}

/// Parameters `(beta, a_lo, a_hi)` of the Curie-Weiss envelopes:
/// `beta = sigma^2 * sum(alpha)`, `a = 2 s sigma^2 alpha_{min / max}`.
pub fn curie_weiss_constants(s: u32, sigma: f64, alphas: &[f64]) -> Result<(f64, f64, f64)> {
    if s == 0 || !(sigma > 0.0) || alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidInput(
            "Curie-Weiss bounds need s >= 1, sigma > 0 and positive weights".into(),
        ));
    }
    let lo = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = 2.0 * s as f64 * sigma * sigma;
    let beta = sigma * sigma * alphas.iter().sum::<f64>();
    Ok((beta, scale * lo, scale * hi))
}

/// Envelopes of the density of `W = sum alpha_k X_k^(2s)` at `x > 0`, with
/// Curie-Weiss inputs, up to a shared constant (taken as 1):
///
/// ```text
/// lower = e^(-(x - beta)/a_lo) x^(beta/a_lo - 1) / (a_hi beta^(beta/a_lo))
/// upper = e^(-(x - beta)/a_hi) x^(beta/a_hi - 1) / (a_lo beta^(beta/a_hi))
/// ```
pub fn curie_weiss_bounds(s: u32, sigma: f64, alphas: &[f64], x: f64) -> Result<(f64, f64)> {
    let (beta, a_lo, a_hi) = curie_weiss_constants(s, sigma, alphas)?;
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("Curie-Weiss envelopes need x >= 0, got {x}")));
    }
    let side = |front: f64, a: f64| {
        let e = beta / a;
        (-front.ln() - e * beta.ln() - (x - beta) / a + (e - 1.0) * x.ln()).exp()
    };
    Ok((side(a_hi, a_lo), side(a_lo, a_hi)))
}

/// Brute-force `E[X_1^2 + ... + X_n^2 | X_1 + ... + X_n = x]` for uniform
/// inputs: draw `draws` points and keep those with `|sum - x| < 0.01`.
/// The window biases the estimate by `O(w^2)`.
pub fn uif_lhs_oracle(n: u32, x: f64, draws: usize, seed: u64) -> Result<MeanEstimate> {
    if n == 0 || !(x > 0.0 && x < n as f64) {
        return Err(Error::Domain(format!("windowed oracle needs 0 < x < n, got x = {x}, n = {n}")));
    }
    let sub = Substream::named(seed, "uif");
    let mut kept = Vec::new();
    for i in 0..draws as u64 {
        let mut stream = sub.at(i);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let u = stream.uniform();
            sum += u;
            sq += u * u;
        }
        if (sum - x).abs() < UIF_WINDOW {
            kept.push(sq);
        }
    }
    if kept.is_empty() {
        return Err(Error::Numerical(format!(
            "no draws of {draws} fell within {UIF_WINDOW} of x = {x}"
        )));
    }
    Ok(MeanEstimate::of(&kept))
}

/// A named reference law or identity, parsed from `name:parameters`.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceCase {
    /// `chi_square:k`
    ChiSquare { k: f64 },
    /// `irwin_hall:n`
    IrwinHall { n: u32 },
    /// `normal:var`
    Normal { var: f64 },
    /// `curie_weiss:s,sigma,alpha_1,...,alpha_n`; envelopes only.
    CurieWeiss { s: u32, sigma: f64, alphas: Vec<f64> },
    /// `uif:n`; the conditional second-moment identity for uniform sums.
    Uif { n: u32 },
}

impl ReferenceCase {
    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn description(&self) -> &'static str {
        match self {
            ReferenceCase::ChiSquare { .. } => {
                "chi-square density; the law of a Curie-Weiss weighted sum with s = 1, sigma = 1 and unit weights"
            }
            ReferenceCase::IrwinHall { .. } => "Irwin-Hall density of a sum of independent U(0,1) variables",
            ReferenceCase::Normal { .. } => "centered Gaussian density of a linear Gaussian statistic",
            ReferenceCase::CurieWeiss { .. } => {
                "two-sided envelopes for a weighted sum of Curie-Weiss powers, up to a shared constant"
            }
            ReferenceCase::Uif { .. } => {
                "conditional second moment of uniform inputs given their sum, against a windowed Monte Carlo oracle"
            }
        }
    }

    /// Support of the un-centered statistic, when the case is a density.
    pub fn support(&self) -> Option<SupportInterval> {
        match self {
            ReferenceCase::ChiSquare { .. } => SupportInterval::new(0.0, f64::INFINITY).ok(),
            ReferenceCase::IrwinHall { n } => SupportInterval::new(0.0, *n as f64).ok(),
            ReferenceCase::Normal { .. } => Some(SupportInterval::real_line()),
            ReferenceCase::CurieWeiss { .. } => SupportInterval::new(0.0, f64::INFINITY).ok(),
            ReferenceCase::Uif { .. } => None,
        }
    }

    pub fn has_pdf(&self) -> bool {
        matches!(
            self,
            ReferenceCase::ChiSquare { .. } | ReferenceCase::IrwinHall { .. } | ReferenceCase::Normal { .. }
        )
    }

    /// Density of the un-centered statistic; `None` for cases without one.
    pub fn pdf(&self, x: f64) -> Option<f64> {
        match self {
            ReferenceCase::ChiSquare { k } => Some(chi_square_pdf(*k, x)),
            ReferenceCase::IrwinHall { n } => irwin_hall_pdf(*n, x).ok(),
            ReferenceCase::Normal { var } => Some(normal_pdf(*var, x)),
            _ => None,
        }
    }

    /// Mean of the un-centered statistic.
    pub fn mean(&self) -> Option<f64> {
        match self {
            ReferenceCase::ChiSquare { k } => Some(*k),
            ReferenceCase::IrwinHall { n } => Some(0.5 * *n as f64),
            ReferenceCase::Normal { .. } => Some(0.0),
            ReferenceCase::CurieWeiss { s, sigma, alphas } => curie_weiss_constants(*s, *sigma, alphas).ok().map(|c| c.0),
            ReferenceCase::Uif { n } => Some(0.5 * *n as f64),
        }
    }
}

impl fmt::Display for ReferenceCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceCase::ChiSquare { k } => write!(f, "chi_square:{k}"),
            ReferenceCase::IrwinHall { n } => write!(f, "irwin_hall:{n}"),
            ReferenceCase::Normal { var } => write!(f, "normal:{var}"),
            ReferenceCase::CurieWeiss { s, sigma, alphas } => {
                write!(f, "curie_weiss:{s},{sigma}")?;
                for a in alphas {
                    write!(f, ",{a}")?;
                }
                Ok(())
            }
            ReferenceCase::Uif { n } => write!(f, "uif:{n}"),
        }
    }
}

impl FromStr for ReferenceCase {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidInput(format!("reference `{text}`: {why}"));
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("expected a number"));
        let int = |s: &str| s.trim().parse::<u32>().map_err(|_| bad("expected a positive integer"));
        let case = match name.trim() {
            "chi_square" => {
                let k = num(args)?;
                if !(k > 0.0) {
                    return Err(bad("degrees of freedom must be positive"));
                }
                ReferenceCase::ChiSquare { k }
            }
            "irwin_hall" => {
                let n = int(args)?;
                if n == 0 || n > IRWIN_HALL_MAX_N {
                    return Err(bad("order must be in 1..=25"));
                }
                ReferenceCase::IrwinHall { n }
            }
            "normal" => {
                let var = if args.trim().is_empty() { 1.0 } else { num(args)? };
                if !(var > 0.0) {
                    return Err(bad("variance must be positive"));
                }
                ReferenceCase::Normal { var }
            }
            "curie_weiss" => {
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() < 3 {
                    return Err(bad("expected s,sigma,alpha_1[,alpha_2...]"));
                }
                let s = int(parts[0])?;
                let sigma = num(parts[1])?;
                let alphas = parts[2..].iter().map(|p| num(p)).collect::<Result<Vec<_>>>()?;
                curie_weiss_constants(s, sigma, &alphas)?;
                ReferenceCase::CurieWeiss { s, sigma, alphas }
            }
            "uif" => {
                let n = int(args)?;
                if n == 0 || n > IRWIN_HALL_MAX_N {
                    return Err(bad("order must be in 1..=25"));
                }
                ReferenceCase::Uif { n }
            }
            _ => return Err(bad("unknown reference")),
        };
        Ok(case)
    }
}
