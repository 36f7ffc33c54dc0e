use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid has {nodes} nodes, more than the limit of {limit}")]
    TooManyNodes { nodes: u128, limit: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    /// The kernel is under-resolved by the grid.
    #[error(
        "resolution rule violated: spacing h = {spacing} exceeds the kernel scale {scale} / 8 = {limit} \
         (need at least 16 nodes across the kernel diameter)"
    )]
    Resolution { spacing: f64, scale: f64, limit: f64 },

    #[error("coefficient was sampled on {coefficient} nodes but the grid has {grid}")]
    NodeMismatch { grid: usize, coefficient: usize },

    #[error("operator dimension {n} exceeds the dense storage limit of {limit}")]
    OperatorTooLarge { n: usize, limit: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("test vector must be strictly positive (entry {index} is {value})")]
    NotPositive { index: usize, value: f64 },

    #[error("operation requires a symmetric operator")]
    NotSymmetric,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{0} did not converge within {1} iterations")]
    NoConvergence(&'static str, usize),

    #[error("time step {dt} exceeds the explicit Euler limit {limit}")]
    TimeStep { dt: f64, limit: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("configuration rejected:\n{}", format_config_errors(.0))]
    Config(Vec<crate::cli_io::ConfigError>),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_config_errors(errors: &[crate::cli_io::ConfigError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
