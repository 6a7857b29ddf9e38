use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Label outside `1..=classes` (reported one-based, as the caller passed it).
    #[error("label {label} is out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("rejection cost {0} outside [0, 0.5)")]
    InvalidCost(f64),

    #[error("not a probability vector: {0}")]
    NotOnSimplex(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no root of the threshold equation in [{lo}, {hi}] for the {loss} loss")]
    NoRoot { loss: String, lo: f64, hi: f64 },

    #[error("minimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("second derivative in r is not positive at r = 0 ({0})")]
    DegenerateCurvature(String),

    #[error("no simplex point satisfies the constraint")]
    EmptyFeasibleSet,

    #[error("training diverged at epoch {epoch}: non-finite loss at example {index}")]
    Divergence { epoch: usize, index: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
