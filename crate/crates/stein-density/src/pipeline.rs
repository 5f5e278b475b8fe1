//! Estimation pipelines shared by the commands and the acceptance checks.

use std::fmt::Write as _;

use stein_density_core::conditional::{default_bins, estimate_theta, ConditionalEstimate, SampleBatch};
use stein_density_core::decomposition::{validate, Component, Decomposition, Statistic, ValidationReport};
use stein_density_core::density::{
    bounds, check_existence, irwin_hall_identity_rhs, l1_distance, linf_distance, reconstruct, reconstruct_with_floor,
    DensityEstimate, Envelopes, ExistenceVerdict, Verdict,
};
use stein_density_core::expressions::{parse, Expr};
use stein_density_core::reference::{curie_weiss_constants, uif_lhs_oracle, ReferenceCase};
use stein_density_core::stein::SteinKernel;

use crate::config::{DecompositionDecl, GridConfig, McConfig, RunConfig, SyntheticDecl};
use crate::parallel::collect_parallel;
use crate::CliError;

/// A statistic with its decomposition, validated when explicit.
#[derive(Debug)]
pub struct Problem {
    pub statistic: Statistic,
    pub decomposition: Decomposition,
    pub validation: Option<ValidationReport>,
}

impl Problem {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, CliError> {
        let (expr, n) = cfg.statistic_expr()?;
        let inputs = cfg.distributions()?;
        let statistic = Statistic::new(expr, inputs, cfg.mc.seed)?;
        let decomposition = match &cfg.decomposition {
            DecompositionDecl::Martingale => Decomposition::martingale(&statistic, cfg.mc.quad_order, cfg.mc.seed)?,
            DecompositionDecl::Explicit(list) => {
                let mut components = Vec::with_capacity(list.len());
                for (j, c) in list.iter().enumerate() {
                    let expr = parse(&c.h, n).map_err(|e| CliError::Config(format!("component {}: {e}", j + 1)))?;
                    if c.active == 0 || c.active > n {
                        return Err(CliError::Config(format!(
                            "component {}: active coordinate {} is outside 1..={n}",
                            j + 1,
                            c.active
                        )));
                    }
                    components.push(Component {
                        expr,
                        active: c.active - 1,
                    });
                }
                Decomposition::explicit(components, n)?
            }
        };
        let validation = match decomposition {
            Decomposition::Explicit(_) => {
                let r = validate(
                    &decomposition,
                    &statistic,
                    cfg.validation.samples,
                    cfg.validation.tolerance,
                    cfg.mc.seed,
                )?;
                if !r.passed {
                    return Err(CliError::Validation(describe_validation(&r)));
                }
                Some(r)
            }
            Decomposition::Martingale(_) => None,
        };
        Ok(Self {
            statistic,
            decomposition,
            validation,
        })
    }

    pub fn kernel(&self) -> Result<SteinKernel<'_>, CliError> {
        Ok(SteinKernel::new(&self.statistic, &self.decomposition)?)
    }
}

pub fn describe_validation(r: &ValidationReport) -> String {
    let mut s = String::new();
    let mark = |ok: bool| if ok { "ok" } else { "FAILED" };
    let _ = writeln!(
        s,
        "  sum residual   {:.3e} (limit {:.3e}) {}",
        r.max_sum_residual,
        r.tolerance + r.mean_allowance,
        mark(r.sum_ok())
    );
    let _ = writeln!(
        s,
        "  centering      {:.3e} over {} points {}",
        r.max_centering,
        r.centering_points,
        mark(r.centering_ok())
    );
    let moments: Vec<String> = r.second_moments.iter().map(|m| format!("{m:.4e}")).collect();
    let _ = write!(s, "  E[h^2]         [{}] {}", moments.join(", "), mark(r.moments_ok()));
    s
}

#[derive(Debug, Clone)]
pub struct ThetaRun {
    pub batch: SampleBatch,
    pub estimate: ConditionalEstimate,
    /// `E[T]`, for un-centering.
    pub mean: f64,
}

pub fn run_theta(problem: &Problem, mc: &McConfig, workers: usize) -> Result<ThetaRun, CliError> {
    let kernel = problem.kernel()?;
    let batch = collect_parallel(&kernel, mc.samples, mc.seed, workers)?;
    let bins = mc.bins.unwrap_or_else(|| default_bins(batch.len()));
    let estimate = estimate_theta(&batch, bins)?;
    Ok(ThetaRun {
        batch,
        estimate,
        mean: problem.statistic.mean(),
    })
}

#[derive(Debug, Clone)]
pub struct DensityRun {
    pub verdict: ExistenceVerdict,
    /// `None` when existence is rejected and not forced.
    pub density: Option<DensityEstimate>,
    pub envelopes: Option<Envelopes>,
    pub range: (f64, f64),
}

/// Median of the equal-count bin means, a stand-in for the median of
/// `theta(T)` used to set the reconstruction floor.
pub fn typical_theta(est: &ConditionalEstimate) -> f64 {
    let mut m = est.bin_means.clone();
    m.sort_by(f64::total_cmp);
    m[m.len() / 2]
}

pub fn run_density(
    run: &ThetaRun,
    grid: &GridConfig,
    envelopes: Option<&(Expr, Expr)>,
    force: bool,
) -> Result<DensityRun, CliError> {
    let verdict = check_existence(&run.estimate);
    let range = run.batch.central_range(grid.quantile_trim);
    if verdict.verdict == Verdict::Rejected && !force {
        return Ok(DensityRun {
            verdict,
            density: None,
            envelopes: None,
            range,
        });
    }
    let est = &run.estimate;
    let theta = |t: f64| {
        let v = est.evaluate(t).0;
        if force {
            v.max(f64::MIN_POSITIVE)
        } else {
            v
        }
    };
    let p = reconstruct_with_floor(theta, range, grid.points, Some(typical_theta(est)))?.with_shift(run.mean);
    let envelopes = match envelopes {
        Some((lo, hi)) => Some(envelopes_on(&p, lo, hi)?),
        None => None,
    };
    Ok(DensityRun {
        verdict,
        density: Some(p),
        envelopes,
        range,
    })
}

/// Envelopes from `theta_lo(t)`, `theta_hi(t)` on the grid of `p`, sharing
/// its normalizer.
pub fn envelopes_on(p: &DensityEstimate, lo: &Expr, hi: &Expr) -> Result<Envelopes, CliError> {
    let eval = |e: &Expr, t: f64| e.eval1(t).unwrap_or(f64::NAN);
    Ok(bounds(|t| eval(lo, t), |t| eval(hi, t), &p.grid, p.c)?)
}

pub fn run_synthetic(decl: &SyntheticDecl, grid: &GridConfig) -> Result<DensityEstimate, CliError> {
    let theta = RunConfig::scalar_expr("synthetic.theta", &decl.theta)?;
    let f = |t: f64| theta.eval1(t).unwrap_or(f64::NAN);
    Ok(reconstruct(f, (decl.range[0], decl.range[1]), grid.points)?)
}

pub fn describe_verdict(run: &DensityRun) -> String {
    let v = &run.verdict;
    let mut s = format!(
        "existence: {} (mass at risk {:.4}, {} flagged bins)",
        v.verdict.as_str(),
        v.mass_at_risk,
        v.flagged.iter().filter(|f| **f).count()
    );
    for (a, b) in v.zero_regions.iter().take(8) {
        let _ = write!(s, "\n  theta not clearly positive on t in [{a:.6}, {b:.6}]");
    }
    if let Some(p) = &run.density {
        let _ = write!(
            s,
            "\nreconstruction on [{:.6}, {:.6}], {} nodes, c = {:.6e}, E[T] = {:.6}",
            run.range.0,
            run.range.1,
            p.grid.len(),
            p.c,
            p.center_shift
        );
        if p.theta_floored {
            s.push_str("\nwarning: theta was raised to its floor somewhere on the grid");
        }
    }
    s
}

/// Distances between a reconstruction and a reference density, compared
/// in the reference's (un-centered) coordinates.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub l1: f64,
    pub linf: f64,
    /// `(x, pdf, reference)` with `x` un-centered.
    pub rows: Vec<(f64, f64, f64)>,
    pub sandwich: Option<Sandwich>,
}

/// Envelope and theta-band checks for Curie-Weiss sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Sandwich {
    pub envelopes: Envelopes,
    pub grid_points: usize,
    pub density_violations: usize,
    pub bins_checked: usize,
    pub band_violations: usize,
}

impl Sandwich {
    pub fn passed(&self) -> bool {
        self.density_violations == 0 && self.band_violations == 0
    }
}

pub fn compare_density(p: &DensityEstimate, reference: &ReferenceCase) -> Result<Comparison, CliError> {
    if !reference.has_pdf() {
        return Err(CliError::Config(format!("reference `{reference}` has no density")));
    }
    let shift = p.center_shift;
    let q = |t: f64| reference.pdf(t + shift).unwrap_or(0.0);
    let rows = p.grid.iter().zip(&p.pdf_values).map(|(&t, &v)| (t + shift, v, q(t))).collect();
    Ok(Comparison {
        l1: l1_distance(p, q),
        linf: linf_distance(p, q),
        rows,
        sandwich: None,
    })
}

/// Curie-Weiss band `a_lo (t + beta) <= theta <= a_hi (t + beta)` on the
/// central bins (within 3 SE) and the density sandwich on the grid.
pub fn curie_weiss_sandwich(
    run: &ThetaRun,
    p: &DensityEstimate,
    s: u32,
    sigma: f64,
    alphas: &[f64],
    central_mass: f64,
) -> Result<Sandwich, CliError> {
    let (beta, a_lo, a_hi) = curie_weiss_constants(s, sigma, alphas)?;
    let est = &run.estimate;
    let mut band_violations = 0;
    let bins = est.central_bins(central_mass);
    for b in bins.clone() {
        let t = est.bin_centers[b];
        let (m, se) = (est.raw_means[b], est.bin_se[b]);
        if m < a_lo * (t + beta) - 3.0 * se || m > a_hi * (t + beta) + 3.0 * se {
            band_violations += 1;
        }
    }
    let envelopes = bounds(|t| a_lo * (t + beta), |t| a_hi * (t + beta), &p.grid, p.c)?;
    let density_violations = p
        .pdf_values
        .iter()
        .zip(envelopes.lower.iter().zip(&envelopes.upper))
        .filter(|(v, (lo, hi))| **v < *lo * (1.0 - 1e-9) || **v > *hi * (1.0 + 1e-9))
        .count();
    Ok(Sandwich {
        grid_points: p.grid.len(),
        density_violations,
        bins_checked: bins.len(),
        band_violations,
        envelopes,
    })
}

/// One row of the uniform-sum conditional moment table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UifRow {
    pub x: f64,
    pub rhs: f64,
    pub oracle: f64,
    pub oracle_se: f64,
    pub accepted: usize,
}

impl UifRow {
    /// Within `3 SE + 1e-3` of the windowed oracle.
    pub fn passed(&self) -> bool {
        (self.rhs - self.oracle).abs() <= 3.0 * self.oracle_se + 1e-3
    }
}

pub const UIF_POINTS: [f64; 3] = [0.5, 1.0, 1.5];

pub fn uif_table(n: u32, draws: usize, seed: u64) -> Result<Vec<UifRow>, CliError> {
    let mut rows = Vec::new();
    for (i, &x) in UIF_POINTS.iter().enumerate() {
        if x >= n as f64 {
            continue;
        }
        let rhs = irwin_hall_identity_rhs(n, x)?;
        let o = uif_lhs_oracle(n, x, draws, seed.wrapping_add(i as u64))?;
        rows.push(UifRow {
            x,
            rhs,
            oracle: o.mean,
            oracle_se: o.se,
            accepted: o.count,
        });
    }
    Ok(rows)
}
