//! Crate-wide error type and exit-code mapping for the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation received arguments outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A patient is missing sessions or channels needed for classification.
    #[error("incomplete data: {0}")]
    IncompleteData(String),

    /// The cohort mean of the change statistic is non-positive, so the
    /// change indicator would divide by a non-positive value.
    #[error("degenerate baseline: cohort mean {0} is not positive")]
    DegenerateBaseline(f64),

    /// Total arrival rate meets or exceeds the service rate.
    #[error("unstable system: total arrival rate {arrival} >= service rate {service}")]
    Unstable { arrival: f64, service: f64 },

    /// A validator's fee does not cover its payment to the compute provider.
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    /// The optimizer cannot form a feasible configuration from the pool.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Scenario or channel-table configuration error, with a field path.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Malformed scenario or signal file, with a location (line or row).
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable kind tag for the CLI's stderr line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::IncompleteData(_) => "incomplete-data",
            Error::DegenerateBaseline(_) => "degenerate-baseline",
            Error::Unstable { .. } => "unstable",
            Error::ConstraintViolation(_) => "constraint-violation",
            Error::Infeasible(_) => "infeasible",
            Error::Config { .. } => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    /// Process exit status: 2 for config/validation problems, 3 for runtime
    /// failures. Usage errors (exit 1) are handled by the CLI parser.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
