//! The `stein-density` command.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use stein_density_core::density::Verdict;
use stein_density_core::reference::ReferenceCase;
use stein_density_core::stein::{cuadras_cov, identity_from_batch, mc_covariance};

use crate::config::{Law, RunConfig};
use crate::output::{float, to_file, write_density, write_rows, write_theta};
use crate::parallel::{collect_parallel, worker_count};
use crate::pipeline::{
    compare_density, curie_weiss_sandwich, describe_validation, describe_verdict, run_density, run_synthetic,
    run_theta, uif_table, Problem,
};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "stein-density", version, about = "Stein kernel estimation and density reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate theta(t) = E[Theta | T = t] and write theta.csv.
    Theta {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Check existence, reconstruct the density and write density.csv.
    Density {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Reconstruct even when existence is rejected.
        #[arg(long)]
        force: bool,
    },
    /// Check E[g(T) T] = E[g'(T) Theta] by Monte Carlo.
    Identity {
        #[arg(long)]
        config: PathBuf,
        /// Test function in `x`.
        #[arg(long)]
        g: String,
    },
    /// Compare against a reference law (chi_square:k, irwin_hall:n,
    /// normal:var, curie_weiss:s,sigma,a1,..., uif:n).
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reference: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Covariance of alpha(X) and beta(X) by kernel quadrature and by Monte Carlo.
    Cov {
        /// uniform[:a,b], normal or curie_weiss:s,sigma.
        #[arg(long)]
        dist: String,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        beta: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional config; its seed is used when given.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn out_path(dir: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        dir.join(file)
    }
}

/// Parse `args` (including the program name) and run, writing the report
/// to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    execute(cli.command, out, worker_count())
}

pub fn execute(command: Command, out: &mut dyn Write, workers: usize) -> Result<(), CliError> {
    match command {
        Command::Theta { config, out_dir } => cmd_theta(&RunConfig::load(&config)?, &out_dir, out, workers),
        Command::Density { config, out_dir, force } => {
            cmd_density(&RunConfig::load(&config)?, &out_dir, force, out, workers)
        }
        Command::Identity { config, g } => cmd_identity(&RunConfig::load(&config)?, &g, out, workers),
        Command::Compare {
            config,
            reference,
            out_dir,
        } => cmd_compare(&RunConfig::load(&config)?, &reference, &out_dir, out, workers),
        Command::Cov {
            dist,
            alpha,
            beta,
            samples,
            seed,
            config,
        } => {
            let seed = match config {
                Some(p) => RunConfig::load(&p)?.mc.seed,
                None => seed,
            };
            cmd_cov(&dist, &alpha, &beta, samples, seed, out)
        }
    }
}

fn report_problem(problem: &Problem, out: &mut dyn Write) -> Result<(), CliError> {
    let s = &problem.statistic;
    writeln!(out, "E[T] = {:.10} (se {:.3e})", s.mean(), s.mean_se())?;
    if let Some(r) = &problem.validation {
        writeln!(out, "decomposition validated on {} samples:\n{}", r.samples, describe_validation(r))?;
    }
    Ok(())
}

pub fn cmd_theta(cfg: &RunConfig, out_dir: &Path, out: &mut dyn Write, workers: usize) -> Result<(), CliError> {
    let problem = Problem::from_config(cfg)?;
    report_problem(&problem, out)?;
    let run = run_theta(&problem, &cfg.mc, workers)?;
    let path = out_path(out_dir, &cfg.outputs.theta);
    to_file(&path, |w| write_theta(w, &run.estimate))?;
    let clipped = run.estimate.clipped.iter().filter(|c| **c).count();
    writeln!(
        out,
        "theta: {} samples in {} bins -> {}",
        run.batch.len(),
        run.estimate.bins(),
        path.display()
    )?;
    if clipped > 0 {
        writeln!(out, "warning: {clipped} bins had negative raw means, clipped to 0")?;
    }
    Ok(())
}

pub fn cmd_density(cfg: &RunConfig, out_dir: &Path, force: bool, out: &mut dyn Write, workers: usize) -> Result<(), CliError> {
    let path = out_path(out_dir, &cfg.outputs.density);
    if let Some(syn) = &cfg.synthetic {
        let p = run_synthetic(syn, &cfg.grid)?;
        to_file(&path, |w| write_density(w, &p, None))?;
        writeln!(out, "synthetic reconstruction, {} nodes, c = {:.6e} -> {}", p.grid.len(), p.c, path.display())?;
        return Ok(());
    }
    let problem = Problem::from_config(cfg)?;
    report_problem(&problem, out)?;
    let run = run_theta(&problem, &cfg.mc, workers)?;
    let envelopes = match &cfg.envelopes {
        Some(e) => Some((
            RunConfig::scalar_expr("envelopes.theta_lo", &e.theta_lo)?,
            RunConfig::scalar_expr("envelopes.theta_hi", &e.theta_hi)?,
        )),
        None => None,
    };
    let d = run_density(&run, &cfg.grid, envelopes.as_ref(), force)?;
    writeln!(out, "{}", describe_verdict(&d))?;
    match &d.density {
        Some(p) => {
            to_file(&path, |w| write_density(w, p, d.envelopes.as_ref()))?;
            writeln!(out, "density -> {}", path.display())?;
            if d.verdict.verdict == Verdict::Rejected {
                writeln!(out, "warning: existence rejected; density written because of --force")?;
            }
            Ok(())
        }
        None => Err(CliError::Rejected(format!(
            "existence rejected (mass at risk {:.4}); no density written, use --force to override",
            d.verdict.mass_at_risk
        ))),
    }
}

pub fn cmd_identity(cfg: &RunConfig, g: &str, out: &mut dyn Write, workers: usize) -> Result<(), CliError> {
    let g = RunConfig::scalar_expr("--g", g)?;
    let problem = Problem::from_config(cfg)?;
    report_problem(&problem, out)?;
    let kernel = problem.kernel()?;
    let batch = collect_parallel(&kernel, cfg.mc.samples, cfg.mc.seed, workers)?;
    let r = identity_from_batch(&batch, &g)?;
    writeln!(out, "g = {g}, {} samples", r.samples)?;
    writeln!(out, "E[g(T) T]       = {:.10} (se {:.3e})", r.lhs, r.lhs_se)?;
    writeln!(out, "E[g'(T) Theta]  = {:.10} (se {:.3e})", r.rhs, r.rhs_se)?;
    writeln!(
        out,
        "|difference| = {:.3e}, 3 SE = {:.3e}: {}",
        r.difference(),
        r.threshold(),
        if r.passed { "pass" } else { "FAIL" }
    )?;
    Ok(())
}

pub fn cmd_compare(cfg: &RunConfig, reference: &str, out_dir: &Path, out: &mut dyn Write, workers: usize) -> Result<(), CliError> {
    let reference: ReferenceCase = reference.parse().map_err(|e: stein_density_core::Error| CliError::Config(e.to_string()))?;
    writeln!(out, "reference {reference}: {}", reference.description())?;
    let path = out_path(out_dir, &cfg.outputs.compare);
    if let ReferenceCase::Uif { n } = reference {
        let rows = uif_table(n, cfg.mc.samples, cfg.mc.seed)?;
        writeln!(out, "{:>6} {:>14} {:>14} {:>11} {:>8}", "x", "identity", "windowed MC", "se", "")?;
        for r in &rows {
            writeln!(
                out,
                "{:>6} {:>14.8} {:>14.8} {:>11.3e} {:>8}",
                r.x,
                r.rhs,
                r.oracle,
                r.oracle_se,
                if r.passed() { "pass" } else { "FAIL" }
            )?;
        }
        let csv = rows.iter().map(|r| {
            vec![
                float(r.x),
                float(r.rhs),
                float(r.oracle),
                float(r.oracle_se),
                r.accepted.to_string(),
                (r.passed() as u8).to_string(),
            ]
        });
        to_file(&path, |w| write_rows(w, &["x", "identity", "oracle", "oracle_se", "accepted", "passed"], csv))?;
        return Ok(());
    }
    let problem = Problem::from_config(cfg)?;
    report_problem(&problem, out)?;
    let run = run_theta(&problem, &cfg.mc, workers)?;
    let d = run_density(&run, &cfg.grid, None, false)?;
    writeln!(out, "{}", describe_verdict(&d))?;
    let p = d.density.as_ref().ok_or_else(|| CliError::Rejected("existence rejected; nothing to compare".into()))?;
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match &reference {
        ReferenceCase::CurieWeiss { s, sigma, alphas } => {
            let sw = curie_weiss_sandwich(&run, p, *s, *sigma, alphas, 0.9)?;
            writeln!(
                out,
                "theta band: {} of {} central bins outside by more than 3 SE",
                sw.band_violations, sw.bins_checked
            )?;
            writeln!(
                out,
                "density sandwich: {} of {} grid points outside the envelopes: {}",
                sw.density_violations,
                sw.grid_points,
                if sw.passed() { "pass" } else { "FAIL" }
            )?;
            let rows = (0..p.grid.len())
                .map(|i| {
                    vec![
                        float(p.grid[i] + p.center_shift),
                        float(p.pdf_values[i]),
                        float(sw.envelopes.lower[i]),
                        float(sw.envelopes.upper[i]),
                    ]
                })
                .collect();
            (vec!["x", "pdf", "lower_env", "upper_env"], rows)
        }
        _ => {
            let c = compare_density(p, &reference)?;
            writeln!(out, "L1 = {:.6e}, Linf = {:.6e}", c.l1, c.linf)?;
            let rows = c
                .rows
                .iter()
                .map(|(x, v, q)| vec![float(*x), float(*v), float(*q), float((v - q).abs())])
                .collect();
            (vec!["x", "pdf", "reference", "abs_diff"], rows)
        }
    };
    to_file(&path, |w| write_rows(w, &header, rows))?;
    writeln!(out, "comparison -> {}", path.display())?;
    Ok(())
}

pub fn cmd_cov(dist: &str, alpha: &str, beta: &str, samples: usize, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let d = Law::from_decl(dist)?.build()?;
    let a = RunConfig::scalar_expr("--alpha", alpha)?;
    let b = RunConfig::scalar_expr("--beta", beta)?;
    let k = cuadras_cov(&d, &a, &b).map_err(|e| CliError::Numerical(e.to_string()))?;
    let m = mc_covariance(&d, &a, &b, samples, seed)?;
    writeln!(out, "kernel quadrature: {:.12} (error estimate {:.1e})", k.value, k.error)?;
    writeln!(out, "monte carlo:       {:.12} (se {:.3e}, {} draws)", m.mean, m.se, m.count)?;
    Ok(())
}
