use thiserror::Error;

use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("modulus is not Dini at small scales: {0}")]
    NotDs(String),

    #[error("modulus is not in DL_{d}: {reason}")]
    NotDl { d: f64, reason: String },

    #[error("kernel evaluated at its singularity z = 0")]
    Singular,

    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotSpd { min_eigenvalue: f64 },

    #[error("ellipticity fails at {point:?}: symmetric part has eigenvalue {eigenvalue:e}")]
    NotElliptic { point: Point, eigenvalue: f64 },

    #[error("ifs maps {0} and {1} have overlapping images of the unit cube")]
    OverlappingIfs(usize, usize),

    #[error("restriction of the measure to the region is empty")]
    EmptyRestriction,

    #[error("dense assembly of {atoms} atoms exceeds the budget of {max} atoms; use the row-streamed opnorm instead")]
    BudgetExceeded { atoms: usize, max: usize },

    #[error("power iteration did not converge within {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
