use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter set or option block failed validation.
    InvalidParams(String),
    /// Two objects that must share a grid, species count or sampling do not.
    Mismatch(String),
    /// A density that must be strictly positive is not.
    NonPositiveDensity { species: usize, cell: usize, value: f64 },
    /// NaN or infinite entry in a state.
    NonFinite { species: usize, cell: usize },
    /// Operation needs a trajectory that ran to completion.
    FailedTrajectory { time: f64 },
    /// Side conditions for an ellipticity case do not hold.
    CaseConditions(String),
    /// The model has entries of degree > 1 in `u`; envelopes must be supplied.
    NeedsExplicitEnvelope,
    /// Singular matrix in a banded solve.
    Singular { row: usize },
    /// A frozen-coefficient solve inside the Picard iteration failed.
    PicardSolve { iterate: usize, time: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::Mismatch(msg) => write!(f, "mismatch: {msg}"),
            Error::NonPositiveDensity { species, cell, value } => {
                write!(f, "density of species {} is {value} (not positive) in cell {cell}", species + 1)
            }
            Error::NonFinite { species, cell } => {
                write!(f, "non-finite density for species {} in cell {cell}", species + 1)
            }
            Error::FailedTrajectory { time } => {
                write!(f, "trajectory failed at t = {time}; norm undefined")
            }
            Error::CaseConditions(msg) => write!(f, "ellipticity case conditions violated: {msg}"),
            Error::NeedsExplicitEnvelope => {
                write!(f, "model has entries of degree > 1 in u; supply explicit Lipschitz envelopes")
            }
            Error::Singular { row } => write!(f, "singular banded matrix at row {row}"),
            Error::PicardSolve { iterate, time } => {
                write!(f, "linearized solve for Picard iterate {iterate} failed at t = {time}")
            }
        }
    }
}

impl core::error::Error for Error {}
