//! Waveguide geometry and the guided TM modes.
//!
//! Everything is in natural units (ħ = c = ε₀ = 1): lengths are measured in
//! some reference length `L`, frequencies, wavenumbers, momenta and rates in
//! `1/L`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Perfectly conducting pipe with walls at `x = 0, a` and `y = 0, b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideGeometry {
    pub a: f64,
    pub b: f64,
}

impl WaveguideGeometry {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let g = Self { a, b };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) || !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "a and b must be positive and finite, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// Cross-section area `a·b`.
    pub fn area(&self) -> f64 {
        self.a * self.b
    }

    fn lattice_cutoff(&self, m: u32, n: u32) -> f64 {
        let (mx, ny) = (m as f64 / self.a, n as f64 / self.b);
        PI * (mx * mx + ny * ny).sqrt()
    }
}

/// A guided TM mode `(m, n)` of a particular geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransverseMode {
    pub m: u32,
    pub n: u32,
    pub cutoff: f64,
}

/// `Ω_mn = π sqrt(m²/a² + n²/b²)`.
pub fn cutoff_frequency(geometry: &WaveguideGeometry, m: i64, n: i64) -> Result<f64> {
    Ok(TransverseMode::new(geometry, m, n)?.cutoff)
}

impl TransverseMode {
    pub fn new(geometry: &WaveguideGeometry, m: i64, n: i64) -> Result<Self> {
        if m < 1 || n < 1 || m > u32::MAX as i64 || n > u32::MAX as i64 {
            return Err(Error::InvalidMode { m, n });
        }
        geometry.validate()?;
        let (m, n) = (m as u32, n as u32);
        Ok(Self {
            m,
            n,
            cutoff: geometry.lattice_cutoff(m, n),
        })
    }

    /// `ω(k) = sqrt(k² + Ω²)`; even in `k`.
    pub fn dispersion(&self, k: f64) -> f64 {
        k.hypot(self.cutoff)
    }

    /// Positive root `k = sqrt(ω² − Ω²)` of the dispersion relation.
    pub fn wavenumber_from_frequency(&self, omega: f64) -> Result<f64> {
        if !(omega >= self.cutoff) {
            return Err(Error::BelowCutoff {
                omega,
                cutoff: self.cutoff,
            });
        }
        Ok(((omega - self.cutoff) * (omega + self.cutoff)).sqrt())
    }

    /// `|dk/dω| = ω / sqrt(ω² − Ω²)`, the one-dimensional density of states
    /// per unit frequency.
    pub fn density_factor(&self, omega: f64) -> Result<f64> {
        if !(omega > self.cutoff) {
            return Err(Error::BelowCutoff {
                omega,
                cutoff: self.cutoff,
            });
        }
        Ok(omega / self.wavenumber_from_frequency(omega)?)
    }

    pub fn label(&self) -> String {
        format!("TM{}{}", self.m, self.n)
    }
}

/// Orders by cutoff; cutoffs equal to 1e-12 relative count as degenerate and
/// fall back to `(m, n)` order.
pub(crate) fn mode_order(lhs: &TransverseMode, rhs: &TransverseMode) -> Ordering {
    let scale = lhs.cutoff.abs().max(rhs.cutoff.abs());
    if (lhs.cutoff - rhs.cutoff).abs() <= 1e-12 * scale {
        (lhs.m, lhs.n).cmp(&(rhs.m, rhs.n))
    } else {
        lhs.cutoff.total_cmp(&rhs.cutoff)
    }
}

fn lattice_bound(omega_max: f64, side: f64) -> u32 {
    let bound = (omega_max * side / PI).ceil();
    if bound.is_finite() && bound >= 1.0 {
        bound.min(u32::MAX as f64) as u32
    } else {
        0
    }
}

/// All TM modes with `Ω_mn ≤ ω_max`, ascending in cutoff.
pub fn enumerate_tm_modes(geometry: &WaveguideGeometry, omega_max: f64) -> Vec<TransverseMode> {
    if !(omega_max > 0.0) || geometry.validate().is_err() {
        return Vec::new();
    }
    let m_max = lattice_bound(omega_max, geometry.a);
    let n_max = lattice_bound(omega_max, geometry.b);
    let mut modes: Vec<TransverseMode> = (1..=m_max)
        .flat_map(|m| (1..=n_max).map(move |n| (m, n)))
        .map(|(m, n)| TransverseMode {
            m,
            n,
            cutoff: geometry.lattice_cutoff(m, n),
        })
        .filter(|mode| mode.cutoff <= omega_max)
        .collect();
    modes.sort_by(mode_order);
    modes
}

/// TE cutoffs `(m, n, Ω_mn)` up to `ω_max`, for reference only: a dipole
/// along the guide axis never couples to them.
pub fn te_cutoffs(geometry: &WaveguideGeometry, omega_max: f64) -> Vec<(u32, u32, f64)> {
    if !(omega_max > 0.0) || geometry.validate().is_err() {
        return Vec::new();
    }
    let m_max = lattice_bound(omega_max, geometry.a);
    let n_max = lattice_bound(omega_max, geometry.b);
    let mut modes: Vec<TransverseMode> = (0..=m_max)
        .flat_map(|m| (0..=n_max).map(move |n| (m, n)))
        .filter(|&(m, n)| m + n > 0)
        .map(|(m, n)| TransverseMode {
            m,
            n,
            cutoff: geometry.lattice_cutoff(m, n),
        })
        .filter(|mode| mode.cutoff <= omega_max)
        .collect();
    modes.sort_by(mode_order);
    modes.into_iter().map(|t| (t.m, t.n, t.cutoff)).collect()
}
