//! JSON run configuration.
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "statistic": "x1^2 + 2*x2^2",
//!   "variables": [{ "law": "curie_weiss", "s": 1, "sigma": 1.0, "count": 2 }],
//!   "decomposition": { "explicit": [
//!     { "h": "x1^2 - 1", "active": 1 },
//!     { "h": "2*x2^2 - 2", "active": 2 }
//!   ] },
//!   "mc": { "samples": 1000000, "seed": 7 },
//!   "grid": { "points": 512, "quantile_trim": 0.005 }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use stein_density_core::distributions::Distribution;
use stein_density_core::expressions::{parse, Expr};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Number of inputs `n`; must equal the highest variable index used.
    pub dimension: Option<usize>,
    pub statistic: Option<String>,
    #[serde(default)]
    pub variables: Vec<VariableDecl>,
    #[serde(default)]
    pub decomposition: DecompositionDecl,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// Envelope functions `theta_lo(t) <= theta(t) <= theta_hi(t)` in `x`.
    pub envelopes: Option<EnvelopeDecl>,
    /// Reconstruct directly from a closed-form `theta` instead of sampling.
    pub synthetic: Option<SyntheticDecl>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Uniform {
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        b: Option<f64>,
    },
    Normal,
    CurieWeiss { s: u32, sigma: f64 },
    Tabulated { grid: Vec<f64>, pdf: Vec<f64> },
}

impl Law {
    pub fn build(&self) -> stein_density_core::Result<Distribution> {
        match self {
            Law::Uniform { a, b } => Distribution::uniform(a.unwrap_or(0.0), b.unwrap_or(1.0)),
            Law::Normal => Ok(Distribution::std_normal()),
            Law::CurieWeiss { s, sigma } => Distribution::curie_weiss(*s, *sigma),
            Law::Tabulated { grid, pdf } => Distribution::tabulated(grid.clone(), pdf.clone()),
        }
    }

    /// `uniform[:a,b]`, `normal`, `curie_weiss:s,sigma`.
    pub fn from_decl(text: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("cannot read distribution `{text}`"));
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let nums: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',').map(|a| a.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
        };
        match (name.trim(), nums.as_slice()) {
            ("uniform", []) => Ok(Law::Uniform { a: None, b: None }),
            ("uniform", [a, b]) => Ok(Law::Uniform { a: Some(*a), b: Some(*b) }),
            ("normal", []) => Ok(Law::Normal),
            ("curie_weiss", [s, sigma]) if s.fract() == 0.0 && *s >= 1.0 => Ok(Law::CurieWeiss {
                s: *s as u32,
                sigma: *sigma,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct VariableDecl {
    #[serde(flatten)]
    pub law: Law,
    /// Repeat this declaration for consecutive inputs.
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionDecl {
    #[default]
    Martingale,
    Explicit(Vec<ComponentDecl>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDecl {
    pub h: String,
    /// 1-based index of the coordinate `h` depends on.
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub bins: Option<usize>,
    pub quad_order: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            bins: None,
            quad_order: stein_density_core::decomposition::DEFAULT_QUAD_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub quantile_trim: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: 512,
            quantile_trim: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub theta: PathBuf,
    pub density: PathBuf,
    pub compare: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            theta: "theta.csv".into(),
            density: "density.csv".into(),
            compare: "compare.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeDecl {
    pub theta_lo: String,
    pub theta_hi: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDecl {
    pub theta: String,
    pub range: [f64; 2],
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// One distribution per input, after expanding `count`.
    pub fn distributions(&self) -> Result<Vec<Distribution>, CliError> {
        let mut out = Vec::new();
        for v in &self.variables {
            let d = v.law.build().map_err(|e| CliError::Config(format!("variables: {e}")))?;
            out.extend(std::iter::repeat_n(d, v.count));
        }
        Ok(out)
    }

    /// Parsed statistic and its dimension, checked against the variables.
    pub fn statistic_expr(&self) -> Result<(Expr, usize), CliError> {
        let text = self
            .statistic
            .as_deref()
            .ok_or_else(|| CliError::Config("config has no `statistic`".into()))?;
        let n = self
            .dimension
            .ok_or_else(|| CliError::Config("config has no `dimension`".into()))?;
        let expr = parse(text, n).map_err(|e| CliError::Config(format!("statistic: {e}")))?;
        let highest = expr.max_variable().map_or(0, |i| i + 1);
        if highest != n {
            return Err(CliError::Config(format!(
                "dimension is {n} but the statistic's highest variable is x{highest}"
            )));
        }
        let inputs: usize = self.variables.iter().map(|v| v.count).sum();
        if inputs != n {
            return Err(CliError::Config(format!("dimension is {n} but {inputs} variables are declared")));
        }
        Ok((expr, n))
    }

    /// Scalar function of `x` from a config field.
    pub fn scalar_expr(field: &str, text: &str) -> Result<Expr, CliError> {
        parse(text, 1).map_err(|e| CliError::Config(format!("{field}: {e}")))
    }
}
