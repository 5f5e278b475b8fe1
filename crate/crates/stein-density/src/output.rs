//! CSV writers. Floats use 17 significant digits so values survive a text
//! round trip exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use stein_density_core::conditional::ConditionalEstimate;
use stein_density_core::density::{DensityEstimate, Envelopes};

/// `v` with 17 significant digits.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn write_rows<W: Write>(mut w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

/// Columns `bin_lo, bin_hi, t_mid, theta_mean, theta_se, count`, with `t`
/// centered and `t_mid` the interpolation node of the bin.
pub fn write_theta<W: Write>(w: W, est: &ConditionalEstimate) -> io::Result<()> {
    let rows = (0..est.bins()).map(|b| {
        vec![
            float(est.bin_edges[b]),
            float(est.bin_edges[b + 1]),
            float(est.bin_centers[b]),
            float(est.bin_means[b]),
            float(est.bin_se[b]),
            est.counts[b].to_string(),
        ]
    });
    write_rows(w, &["bin_lo", "bin_hi", "t_mid", "theta_mean", "theta_se", "count"], rows)
}

/// Columns `x, pdf, pdf_shifted[, lower_env, upper_env]`: `pdf` is the
/// centered density at `x` and `pdf_shifted` the un-centered density at the
/// same `x`.
pub fn write_density<W: Write>(w: W, p: &DensityEstimate, env: Option<&Envelopes>) -> io::Result<()> {
    let mut header = vec!["x", "pdf", "pdf_shifted"];
    if env.is_some() {
        header.extend(["lower_env", "upper_env"]);
    }
    let rows = p.grid.iter().enumerate().map(|(i, &x)| {
        let mut row = vec![float(x), float(p.pdf_values[i]), float(p.pdf_shifted(x))];
        if let Some(e) = env {
            row.push(float(e.lower[i]));
            row.push(float(e.upper[i]));
        }
        row
    });
    write_rows(w, &header, rows)
}

/// Write through `f` to `path`, creating parent directories.
pub fn to_file<F>(path: &Path, f: F) -> io::Result<()>
where
    F: FnOnce(BufWriter<File>) -> io::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    f(BufWriter::new(File::create(path)?))
}
