use std::path::PathBuf;

use thiserror::Error;

use crate::elliptic::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        report: SolveReport,
    },

    #[error("Picard iteration failed at step {step} after {halvings} halvings; residual trace {trace:?}")]
    PicardDivergence {
        step: usize,
        halvings: usize,
        trace: Vec<f64>,
    },

    #[error("bound violation at step {step}: {quantity} = {value:.6e} at cell {cell} (bound {bound:.6e})")]
    BoundViolation {
        step: usize,
        quantity: &'static str,
        cell: usize,
        value: f64,
        bound: f64,
    },

    #[error("invariant breach: {0}")]
    Invariant(String),

    #[error("config parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    ConfigParse { line: Option<usize>, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("time {t} outside the recorded range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BoundViolation { .. } | Error::Invariant(_) => 2,
            Error::SolverFailure { .. } | Error::PicardDivergence { .. } => 3,
            Error::ConfigParse { .. } | Error::Validation { .. } | Error::InvalidDomain(_) => 4,
            _ => 1,
        }
    }
}
