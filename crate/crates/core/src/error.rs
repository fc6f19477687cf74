use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("TM modes need m >= 1 and n >= 1, got ({m}, {n})")]
    InvalidMode { m: i64, n: i64 },
    #[error("frequency {omega} is not above the cutoff {cutoff}")]
    BelowCutoff { omega: f64, cutoff: f64 },
    #[error("invalid atom parameters: {0}")]
    InvalidAtom(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operation requires an atom at rest, got p_z = {p_z}")]
    NotAtRest { p_z: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl Error {
    /// True for errors caused by the numerical kernels rather than by the
    /// inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerics(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
