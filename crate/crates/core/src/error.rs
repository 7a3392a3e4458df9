use thiserror::Error;

use crate::lattice::LatticePoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} is outside the sequence window")]
    Coverage(LatticePoint),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("witness error: {0}")]
    Witness(String),

    #[error("weights cannot be rationalized within {tolerance} using denominators up to {max_denominator}")]
    Rationalization { tolerance: f64, max_denominator: u64 },

    #[error("frequency {0} aliases to zero on the grid")]
    Alias(LatticePoint),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("value {re}+{im}i lies outside the convex hull of the target set")]
    Geometry { re: f64, im: f64 },

    #[error("invalid system: {0}")]
    System(String),

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
