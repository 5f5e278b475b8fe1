use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised anywhere in the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("variable x{index} exceeds the declared dimension {dimension}")]
    Dimension { index: usize, dimension: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cannot evaluate `{node}`: {reason}")]
    Eval { node: String, reason: &'static str },

    #[error("quadrature on [{a}, {b}] did not converge (error estimate {error:e})")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("density vanishes at x = {x}; point lies on the support boundary")]
    SupportBoundary { x: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate statistic: all {count} sampled values equal {value}")]
    Degenerate { count: usize, value: f64 },

    #[error("theta is not positive at t = {t} (value {value}); no density there")]
    Existence { t: f64, value: f64 },

    #[error("sample {index}: {source}")]
    Sample {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_sample(self, index: u64) -> Self {
        match self {
            e @ Error::Sample { .. } => e,
            e => Error::Sample {
                index,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, looking through sample-index wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sample { source, .. } => source.root(),
            e => e,
        }
    }
}
