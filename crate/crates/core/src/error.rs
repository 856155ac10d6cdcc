use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular drive condition: |omega| == |omega'| ({omega} vs {omega_prime})")]
    SingularDrive { omega: f64, omega_prime: f64 },

    #[error("no root bracketed in [{lo}, {hi}]: {what}")]
    NoSolution { what: String, lo: f64, hi: f64 },

    #[error("mean spin vanishes (|<S>| = {0:e}); squeezing direction undefined")]
    UndefinedDirection(f64),

    #[error("propagation did not converge: refinement disagreement {achieved:e} > tolerance {tol:e}")]
    Accuracy { achieved: f64, tol: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("sweep point {point} failed: {source}")]
    SweepPoint {
        point: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) => 2,
            Error::DimensionMismatch { .. } => 2,
            Error::SingularDrive { .. } | Error::NoSolution { .. } => 3,
            Error::UndefinedDirection(_) => 3,
            Error::Accuracy { .. } => 4,
            Error::SweepPoint { source, .. } => source.exit_code(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
