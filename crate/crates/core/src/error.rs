use thiserror::Error;

use crate::netmodel::BusId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("case parse error: {0}")]
    Parse(String),

    #[error("branch {branch} references undefined bus {bus}")]
    DanglingBus { branch: u32, bus: BusId },

    #[error("duplicate {what} id {id}")]
    DuplicateId { what: &'static str, id: u32 },

    #[error("expected exactly one slack bus, found {0}")]
    SlackCount(usize),

    #[error("invalid case: {0}")]
    InvalidCase(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("power flow did not converge after {iterations} iterations (max mismatch {mismatch:.3e} pu)")]
    NonConvergence { iterations: usize, mismatch: f64 },

    #[error("singular jacobian: {0}")]
    SingularJacobian(String),

    #[error("simulation diverged at t = {time:.4} s: {reason}")]
    Diverged { time: f64, reason: String },

    #[error("trajectory grids do not match: {0}")]
    GridMismatch(String),

    #[error("state matrix is not Hurwitz (max eigenvalue real part {max_real:.3e})")]
    NotHurwitz { max_real: f64 },

    #[error("{count} combinations exceed the exhaustive limit of {limit}; use the mads solver")]
    TooManyCombinations { count: u128, limit: u128 },

    #[error("covariance store mismatch: {0}")]
    CacheMismatch(String),

    #[error("malformed coverage table: {0}")]
    Coverage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 1 for numerical failures, 2 for usage and validation problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. }
            | Error::SingularJacobian(_)
            | Error::Diverged { .. }
            | Error::NotHurwitz { .. } => 1,
            _ => 2,
        }
    }
}
