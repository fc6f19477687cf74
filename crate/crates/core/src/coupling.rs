//! Two-level atom parameters and the atom–mode coupling strength.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{enumerate_tm_modes, TransverseMode, WaveguideGeometry};

/// Below this magnitude a transverse profile is treated as an exact node.
pub const ZERO_COUPLING_THRESHOLD: f64 = 1e-12;

/// Ratio above which the nonrelativistic expansion is no longer trusted.
pub const NONRELATIVISTIC_LIMIT: f64 = 0.1;

/// Two-level atom with quantized axial motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    /// Transition frequency ω_A.
    #[serde(rename = "omega_A")]
    pub omega_a: f64,
    /// Rest energy Mc².
    pub rest_energy: f64,
    /// Transition dipole magnitude d.
    pub dipole: f64,
    pub x0: f64,
    pub y0: f64,
    /// Initial axial center-of-mass momentum.
    pub p_z: f64,
}

impl AtomParams {
    pub fn validate(&self, geometry: &WaveguideGeometry) -> Result<()> {
        geometry.validate()?;
        let finite = [self.omega_a, self.rest_energy, self.dipole, self.x0, self.y0, self.p_z]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidAtom("all parameters must be finite".into()));
        }
        if !(self.omega_a > 0.0) {
            return Err(Error::InvalidAtom(format!("omega_A must be positive, got {}", self.omega_a)));
        }
        if !(self.rest_energy > 0.0) {
            return Err(Error::InvalidAtom(format!(
                "rest_energy must be positive, got {}",
                self.rest_energy
            )));
        }
        if !(self.dipole >= 0.0) {
            return Err(Error::InvalidAtom(format!("dipole must be >= 0, got {}", self.dipole)));
        }
        if !(self.x0 > 0.0 && self.x0 < geometry.a) || !(self.y0 > 0.0 && self.y0 < geometry.b) {
            return Err(Error::InvalidAtom(format!(
                "atom at ({}, {}) is outside the guide (0, {}) x (0, {})",
                self.x0, self.y0, geometry.a, geometry.b
            )));
        }
        Ok(())
    }

    /// Axial velocity `p_z / M`.
    pub fn velocity(&self) -> f64 {
        self.p_z / self.rest_energy
    }

    /// Free kinetic energy `p_z² / 2M`.
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.p_z * self.p_z / self.rest_energy
    }

    /// Initial energy `ω_A + p_z²/2M` of the excited atom.
    pub fn initial_energy(&self) -> f64 {
        self.omega_a + self.kinetic_energy()
    }

    /// Both `|p_z|/Mc²` and `ω_A/Mc²` are below [`NONRELATIVISTIC_LIMIT`].
    pub fn is_trusted(&self) -> bool {
        self.velocity().abs() < NONRELATIVISTIC_LIMIT
            && self.omega_a / self.rest_energy < NONRELATIVISTIC_LIMIT
    }

    pub fn at_rest(&self) -> Self {
        Self { p_z: 0.0, ..*self }
    }
}

/// `sin(mπx₀/a)·sin(nπy₀/b)`, snapped to exactly zero on nodal lines.
pub fn transverse_profile(atom: &AtomParams, mode: &TransverseMode, geometry: &WaveguideGeometry) -> f64 {
    let sx = (mode.m as f64 * PI * atom.x0 / geometry.a).sin();
    let sy = (mode.n as f64 * PI * atom.y0 / geometry.b).sin();
    let p = sx * sy;
    if p.abs() <= ZERO_COUPLING_THRESHOLD {
        0.0
    } else {
        p
    }
}

/// The frequency-independent part `d²Ω²·profile²/(π·A)` of `|g|²`.
pub fn coupling_strength(atom: &AtomParams, mode: &TransverseMode, geometry: &WaveguideGeometry) -> f64 {
    let profile = transverse_profile(atom, mode, geometry);
    let (d, omega) = (atom.dipole, mode.cutoff);
    d * d * omega * omega * profile * profile / (PI * geometry.area())
}

/// `|g_jω|² = d²Ω²·profile²/(π·A·ω)`.
pub fn coupling_sq_omega(
    atom: &AtomParams,
    mode: &TransverseMode,
    geometry: &WaveguideGeometry,
    omega: f64,
) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {omega}")));
    }
    Ok(coupling_strength(atom, mode, geometry) / omega)
}

/// `|g_jk|²`, the same coupling evaluated at `ω = ω_jk`.
pub fn coupling_sq_k(atom: &AtomParams, mode: &TransverseMode, geometry: &WaveguideGeometry, k: f64) -> f64 {
    coupling_strength(atom, mode, geometry) / mode.dispersion(k)
}

/// TM modes up to `ω_max` that the atom actually couples to.
pub fn coupled_modes(atom: &AtomParams, geometry: &WaveguideGeometry, omega_max: f64) -> Vec<TransverseMode> {
    enumerate_tm_modes(geometry, omega_max)
        .into_iter()
        .filter(|mode| transverse_profile(atom, mode, geometry) != 0.0)
        .collect()
}

/// A coupled mode with its frequency-independent coupling precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ModeCoupling {
    pub mode: TransverseMode,
    /// `d²Ω²·profile²/(π·A)`
    pub strength: f64,
}

impl ModeCoupling {
    pub fn new(atom: &AtomParams, mode: TransverseMode, geometry: &WaveguideGeometry) -> Self {
        Self {
            mode,
            strength: coupling_strength(atom, &mode, geometry),
        }
    }
}

pub(crate) fn mode_couplings(atom: &AtomParams, geometry: &WaveguideGeometry, omega_max: f64) -> Vec<ModeCoupling> {
    coupled_modes(atom, geometry, omega_max)
        .into_iter()
        .map(|mode| ModeCoupling::new(atom, mode, geometry))
        .collect()
}
