//! Tolerance-explicit numerical kernels.
//!
//! Everything in here is stateless: a kernel receives its integrand or
//! target function together with a [`ToleranceSpec`] and either meets the
//! tolerance or returns a [`NumericsError`] that carries the best estimate
//! it reached.

mod oscillatory;
mod principal_value;
mod quadrature;
mod richardson;
mod roots;

pub use oscillatory::{spherical_bessel_j, OscillatoryPanels, PanelOptions};
pub use principal_value::{integrate_principal_value, integrate_principal_value_with_residue};
pub use quadrature::{
    integrate_adaptive, integrate_adaptive_breaks, integrate_adaptive_real, Integral,
};
pub use richardson::{extract_order_coefficient, OrderCoefficient};
pub use roots::find_root_bracketed;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative/absolute accuracy target and an evaluation budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub rel: f64,
    pub abs: f64,
    pub max_evals: usize,
}

impl ToleranceSpec {
    pub const MIN_REL: f64 = 1e-15;
    pub const MIN_EVALS: usize = 64;

    pub fn new(rel: f64, abs: f64, max_evals: usize) -> Result<Self, NumericsError> {
        let tol = Self { rel, abs, max_evals };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.rel >= Self::MIN_REL) || !self.rel.is_finite() {
            return Err(NumericsError::InvalidTolerance(format!(
                "rel must be >= {:e}, got {}",
                Self::MIN_REL,
                self.rel
            )));
        }
        if !(self.abs >= 0.0) || !self.abs.is_finite() {
            return Err(NumericsError::InvalidTolerance(format!(
                "abs must be >= 0, got {}",
                self.abs
            )));
        }
        if self.max_evals < Self::MIN_EVALS {
            return Err(NumericsError::InvalidTolerance(format!(
                "max_evals must be >= {}, got {}",
                Self::MIN_EVALS,
                self.max_evals
            )));
        }
        Ok(())
    }

    /// Accuracy target for a quantity of magnitude `scale`.
    pub fn target(&self, scale: f64) -> f64 {
        self.abs.max(self.rel * scale.abs())
    }
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-14,
            max_evals: 200_000,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("root search exceeded {evals} evaluations; bracket [{lo}, {hi}]")]
    RootNotConverged { lo: f64, hi: f64, evals: usize },
    #[error(
        "quadrature did not converge after {evals} evaluations: value {value_re:e}{value_im:+e}i, \
         error estimate {error:e}"
    )]
    QuadratureNotConverged {
        value_re: f64,
        value_im: f64,
        error: f64,
        evals: usize,
    },
    #[error("pole at {pole} is not simple within tolerance: residue estimates {first:e} vs {second:e}")]
    PoleNotSimple { pole: f64, first: f64, second: f64 },
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },
    #[error("oscillatory panel build failed: {0}")]
    PanelLimit(String),
}
