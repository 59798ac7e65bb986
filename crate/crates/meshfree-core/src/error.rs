use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// invalid arguments exit 1, numerical failures exit 2, I/O exits 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate stencil geometry: {0}")]
    DegenerateGeometry(String),

    #[error("ill-conditioned stencil at node {node}: condition estimate {estimate:.3e} exceeds limit {limit:.3e}")]
    IllConditionedStencil {
        node: usize,
        estimate: f64,
        limit: f64,
    },

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("unstable run: {0}")]
    UnstableRun(String),

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Exit code contract used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::IncompatibleCheckpoint(_) => 1,
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}
