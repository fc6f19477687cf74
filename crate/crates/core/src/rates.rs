//! Golden-rule emission rates and emitted frequencies, with and without
//! centre-of-mass recoil.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::coupling::{coupled_modes, coupling_strength, AtomParams};
use crate::error::{Error, Result};
use crate::model::{TransverseMode, WaveguideGeometry};
use crate::numerics::{
    extract_order_coefficient, find_root_bracketed, integrate_adaptive_breaks, OrderCoefficient, ToleranceSpec,
};

/// Direction of the emitted photon along the guide axis.
///
/// `Right` photons travel towards `+z`; for `p_z > 0` they share the atom's
/// direction of motion and are blue-shifted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Right,
    Left,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Right => 1.0,
            Branch::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactRoot,
    FirstOrderSeries,
    PaperSeries,
}

/// One emission channel: a mode, a propagation direction and an evaluation
/// method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeEmission {
    pub mode: TransverseMode,
    pub branch: Branch,
    pub omega_emitted: f64,
    pub gamma_contribution: f64,
    /// `1/|f'(ω*)|` of the energy-conservation argument at the root.
    pub jacobian: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmissionReport {
    pub geometry: WaveguideGeometry,
    pub atom: AtomParams,
    pub entries: Vec<ModeEmission>,
    pub gamma_fixed: f64,
    pub gamma_total_exact: f64,
    pub gamma_total_first_order: f64,
    pub gamma_total_paper_form: f64,
    /// `|paper form − exact| / Γ_f`, zero when there is no channel.
    pub paper_discrepancy: f64,
    /// `exact − Γ_f`; its sign is the direction of the recoil correction.
    pub recoil_shift: f64,
    pub trusted: bool,
    /// No coupled mode lies below the initial energy.
    pub no_active_channel: bool,
}

impl EmissionReport {
    pub fn entries_by(&self, method: Method) -> impl Iterator<Item = &ModeEmission> {
        self.entries.iter().filter(move |e| e.method == method)
    }

    /// Exact emitted frequency of the lowest emitting mode on `branch`.
    pub fn lowest_mode_frequency(&self, branch: Branch) -> Option<f64> {
        let lowest = self.entries_by(Method::ExactRoot).map(|e| e.mode.cutoff).reduce(f64::min)?;
        self.entries_by(Method::ExactRoot)
            .filter(|e| e.branch == branch && e.mode.cutoff == lowest)
            .map(|e| e.omega_emitted)
            .reduce(f64::max)
    }
}

/// Infinite-mass rate into every coupled mode below `ω_A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedAtomRate {
    pub gamma: f64,
    pub active_modes: Vec<TransverseMode>,
    /// Set when `ω_A` lies below every coupled cutoff.
    pub no_active_channel: bool,
}

/// Frequencies of the two emission branches of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceRoots {
    pub omega_plus: Option<f64>,
    pub omega_minus: Option<f64>,
}

/// A photon wavenumber on the energy shell of a recoiling atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellRoot {
    pub k: f64,
    pub omega: f64,
    /// Derivative of `E − ω_k − (p_z − k)²/2M` with respect to `k`.
    pub slope: f64,
}

impl ShellRoot {
    pub fn branch(&self) -> Branch {
        if self.k >= 0.0 {
            Branch::Right
        } else {
            Branch::Left
        }
    }
}

/// Value and error estimate of the nascent-delta quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub error: f64,
}

fn root_tolerance() -> ToleranceSpec {
    ToleranceSpec {
        rel: 1e-15,
        abs: 1e-300,
        max_evals: 8000,
    }
}

fn require_at_rest(atom: &AtomParams) -> Result<()> {
    if atom.p_z != 0.0 {
        return Err(Error::NotAtRest { p_z: atom.p_z });
    }
    Ok(())
}

fn require_active(atom: &AtomParams, mode: &TransverseMode) -> Result<()> {
    if !(atom.omega_a > mode.cutoff) {
        return Err(Error::BelowCutoff {
            omega: atom.omega_a,
            cutoff: mode.cutoff,
        });
    }
    Ok(())
}

/// `Γ^S = 4 d²Ω² profile² / (A sqrt(ω_A² − Ω²))`.
pub fn stationary_mode_rate(atom: &AtomParams, mode: &TransverseMode, geometry: &WaveguideGeometry) -> Result<f64> {
    require_active(atom, mode)?;
    let k = mode.wavenumber_from_frequency(atom.omega_a)?;
    Ok(4.0 * PI * coupling_strength(atom, mode, geometry) / k)
}

/// Modes that can carry a photon away from the initial energy.
fn emission_modes(atom: &AtomParams, geometry: &WaveguideGeometry) -> Vec<TransverseMode> {
    let energy = atom.initial_energy();
    coupled_modes(atom, geometry, energy)
        .into_iter()
        .filter(|m| m.cutoff < energy)
        .collect()
}

pub fn fixed_atom_rate(atom: &AtomParams, geometry: &WaveguideGeometry) -> Result<FixedAtomRate> {
    atom.validate(geometry)?;
    let active_modes: Vec<TransverseMode> = coupled_modes(atom, geometry, atom.omega_a)
        .into_iter()
        .filter(|m| m.cutoff < atom.omega_a)
        .collect();
    let gamma = active_modes
        .iter()
        .map(|m| stationary_mode_rate(atom, m, geometry))
        .sum::<Result<f64>>()?;
    Ok(FixedAtomRate {
        gamma,
        no_active_channel: active_modes.is_empty(),
        active_modes,
    })
}

/// Distance `ω_R − Ω` of the recoil-shifted frequency above the cutoff,
/// written without cancellation.
fn recoil_gap(atom: &AtomParams, cutoff: f64) -> f64 {
    let mass = atom.rest_energy;
    let lead = 1.0 + cutoff / mass;
    let excess = atom.omega_a - cutoff;
    2.0 * excess / (lead + (lead * lead + 2.0 * excess / mass).sqrt())
}

/// `ω_R = sqrt(M² + 2Mω_A + Ω²) − M`.
pub fn emitted_frequency_at_rest(atom: &AtomParams, mode: &TransverseMode) -> Result<f64> {
    require_at_rest(atom)?;
    require_active(atom, mode)?;
    Ok(mode.cutoff + recoil_gap(atom, mode.cutoff))
}

/// `ω_A + (Ω² − ω_A²)/2M`.
pub fn emitted_frequency_at_rest_first_order(atom: &AtomParams, mode: &TransverseMode) -> Result<f64> {
    require_at_rest(atom)?;
    require_active(atom, mode)?;
    let (w, c) = (atom.omega_a, mode.cutoff);
    Ok(w + (c - w) * (c + w) / (2.0 * atom.rest_energy))
}

fn branches() -> [Branch; 2] {
    [Branch::Right, Branch::Left]
}

struct Totals {
    exact: f64,
    first_order: f64,
    paper: f64,
}

fn finish_report(
    atom: &AtomParams,
    geometry: &WaveguideGeometry,
    entries: Vec<ModeEmission>,
    gamma_fixed: f64,
    paper: f64,
) -> EmissionReport {
    let sum = |m: Method| entries.iter().filter(|e| e.method == m).map(|e| e.gamma_contribution).sum::<f64>();
    let totals = Totals {
        exact: sum(Method::ExactRoot),
        first_order: sum(Method::FirstOrderSeries),
        paper,
    };
    let paper_discrepancy = if gamma_fixed > 0.0 {
        (totals.paper - totals.exact).abs() / gamma_fixed
    } else {
        0.0
    };
    EmissionReport {
        geometry: *geometry,
        atom: *atom,
        no_active_channel: !entries.iter().any(|e| e.method == Method::ExactRoot),
        entries,
        gamma_fixed,
        gamma_total_exact: totals.exact,
        gamma_total_first_order: totals.first_order,
        gamma_total_paper_form: totals.paper,
        paper_discrepancy,
        recoil_shift: totals.exact - gamma_fixed,
        trusted: atom.is_trusted(),
    }
}

/// Recoil-corrected golden-rule rate of an atom initially at rest.
pub fn rate_at_rest_exact(atom: &AtomParams, geometry: &WaveguideGeometry) -> Result<EmissionReport> {
    require_at_rest(atom)?;
    let fixed = fixed_atom_rate(atom, geometry)?;
    let mass = atom.rest_energy;
    let ratio = atom.omega_a / mass;
    let mut entries = Vec::new();
    for mode in emission_modes(atom, geometry) {
        let strength = coupling_strength(atom, &mode, geometry);
        let gap = recoil_gap(atom, mode.cutoff);
        let omega = mode.cutoff + gap;
        let k = (gap * (omega + mode.cutoff)).sqrt();
        if !(k > 0.0) {
            continue;
        }
        let jacobian = 1.0 / (1.0 + omega / mass);
        let stationary = stationary_mode_rate(atom, &mode, geometry)?;
        let omega_first = emitted_frequency_at_rest_first_order(atom, &mode)?;
        for branch in branches() {
            entries.push(ModeEmission {
                mode,
                branch,
                omega_emitted: omega,
                gamma_contribution: 2.0 * PI * strength / k * jacobian,
                jacobian,
                method: Method::ExactRoot,
            });
            entries.push(ModeEmission {
                mode,
                branch,
                omega_emitted: omega_first,
                gamma_contribution: 0.5 * stationary * (1.0 - 0.5 * ratio),
                jacobian: 1.0 - ratio,
                method: Method::FirstOrderSeries,
            });
            entries.push(ModeEmission {
                mode,
                branch,
                omega_emitted: omega_first,
                gamma_contribution: 0.5 * stationary * (1.0 - 0.75 * ratio),
                jacobian: 1.0,
                method: Method::PaperSeries,
            });
        }
    }
    let paper = rate_at_rest_paper_first_order(atom, geometry)?;
    Ok(finish_report(atom, geometry, entries, fixed.gamma, paper))
}

/// The printed first-order result `(1 − 3ω_A/4M) Γ_f`.
pub fn rate_at_rest_paper_first_order(atom: &AtomParams, geometry: &WaveguideGeometry) -> Result<f64> {
    require_at_rest(atom)?;
    let fixed = fixed_atom_rate(atom, geometry)?;
    Ok((1.0 - 0.75 * atom.omega_a / atom.rest_energy) * fixed.gamma)
}

/// The printed moving-atom result `Γ_f (1 + ω_A/2M)`.
pub fn rate_moving_paper_first_order(atom: &AtomParams, geometry: &WaveguideGeometry) -> Result<f64> {
    let fixed = fixed_atom_rate(atom, geometry)?;
    Ok((1.0 + 0.5 * atom.omega_a / atom.rest_energy) * fixed.gamma)
}

pub(crate) fn recoil_dispersion(mode: &TransverseMode, p_z: f64, mass: f64, k: f64) -> f64 {
    let dp = p_z - k;
    mode.dispersion(k) + 0.5 * dp * dp / mass
}

/// Wavenumber minimizing `ω_k + (p_z − k)²/2M`; it lies between 0 and `p_z`.
pub(crate) fn shell_minimum(mode: &TransverseMode, p_z: f64, mass: f64) -> Result<f64> {
    if p_z == 0.0 {
        return Ok(0.0);
    }
    let slope = |k: f64| k / mode.dispersion(k) + (k - p_z) / mass;
    Ok(find_root_bracketed(slope, p_z.min(0.0), p_z.max(0.0), &root_tolerance())?)
}

/// Grows `start + step·2^i` away from `anchor` until `f` turns negative.
fn bracket_outward(f: &impl Fn(f64) -> f64, anchor: f64, step: f64) -> Option<f64> {
    let mut width = step;
    for _ in 0..=60 {
        let x = anchor + width;
        if f(x) < 0.0 {
            return Some(x);
        }
        width *= 2.0;
    }
    None
}

/// Photon wavenumbers satisfying `E = ω_k + (p_z − k)²/2M`, ascending.
///
/// The right-hand side is convex in `k`, so there are either two roots or
/// none.
pub fn energy_shell_roots(atom: &AtomParams, mode: &TransverseMode, energy: f64) -> Result<Vec<ShellRoot>> {
    shell_roots(mode, atom.p_z, atom.rest_energy, energy)
}

pub(crate) fn shell_roots(mode: &TransverseMode, p: f64, mass: f64, energy: f64) -> Result<Vec<ShellRoot>> {
    if !energy.is_finite() {
        return Err(Error::InvalidArgument(format!("energy must be finite, got {energy}")));
    }
    let excess = |k: f64| energy - recoil_dispersion(mode, p, mass, k);
    let k_min = shell_minimum(mode, p, mass)?;
    if !(excess(k_min) > 0.0) {
        return Ok(Vec::new());
    }
    let step = energy.abs().max(mode.cutoff).max(1.0);
    let tol = root_tolerance();
    let mut roots = Vec::with_capacity(2);
    for dir in [-1.0, 1.0] {
        let far = bracket_outward(&|x| excess(x), k_min, dir * step);
        let Some(far) = far else { continue };
        let (lo, hi) = if dir < 0.0 { (far, k_min) } else { (k_min, far) };
        let k = find_root_bracketed(excess, lo, hi, &tol)?;
        let omega = mode.dispersion(k);
        roots.push(ShellRoot {
            k,
            omega,
            slope: -k / omega + (p - k) / mass,
        });
    }
    Ok(roots)
}

/// Emission roots on each branch of the recoil resonance condition.
///
/// `omega_plus` belongs to the branch whose frequency rises with `p_z`.
/// When a branch carries two roots (kinetic energy opening a channel whose
/// cutoff lies above `ω_A`), the higher frequency is reported.
pub fn resonance_roots_moving(atom: &AtomParams, mode: &TransverseMode) -> Result<ResonanceRoots> {
    let roots = energy_shell_roots(atom, mode, atom.initial_energy())?;
    let pick = |b: Branch| {
        roots
            .iter()
            .filter(|r| r.branch() == b)
            .map(|r| r.omega)
            .reduce(f64::max)
    };
    Ok(ResonanceRoots {
        omega_plus: pick(Branch::Right),
        omega_minus: pick(Branch::Left),
    })
}

/// Recoil-corrected golden-rule rate of an atom with axial momentum `p_z`.
pub fn rate_moving_exact(atom: &AtomParams, geometry: &WaveguideGeometry) -> Result<EmissionReport> {
    let fixed = fixed_atom_rate(atom, geometry)?;
    let mass = atom.rest_energy;
    let (w, v) = (atom.omega_a, atom.velocity());
    let ratio = w / mass;
    let mut entries = Vec::new();
    for mode in emission_modes(atom, geometry) {
        let strength = coupling_strength(atom, &mode, geometry);
        for root in energy_shell_roots(atom, &mode, atom.initial_energy())? {
            if root.k == 0.0 {
                continue;
            }
            entries.push(ModeEmission {
                mode,
                branch: root.branch(),
                omega_emitted: root.omega,
                gamma_contribution: 2.0 * PI * strength / (root.omega * root.slope.abs()),
                jacobian: root.k.abs() / (root.omega * root.slope.abs()),
                method: Method::ExactRoot,
            });
        }
        if !(w > mode.cutoff) {
            continue;
        }
        let stationary = stationary_mode_rate(atom, &mode, geometry)?;
        let k_a = mode.wavenumber_from_frequency(w)?;
        let k_sq = k_a * k_a;
        for branch in branches() {
            let s = branch.sign();
            entries.push(ModeEmission {
                mode,
                branch,
                omega_emitted: w + s * v * k_a - 0.5 * k_sq / mass,
                gamma_contribution: 0.5 * stationary * (1.0 - 0.5 * ratio),
                jacobian: 1.0 + s * v * w / k_a - ratio,
                method: Method::FirstOrderSeries,
            });
            entries.push(ModeEmission {
                mode,
                branch,
                omega_emitted: w + s * v * k_sq - 0.5 * k_sq / mass,
                gamma_contribution: 0.5 * stationary * (1.0 + 0.5 * ratio),
                jacobian: 1.0,
                method: Method::PaperSeries,
            });
        }
    }
    let paper = rate_moving_paper_first_order(atom, geometry)?;
    Ok(finish_report(atom, geometry, entries, fixed.gamma, paper))
}

fn nascent_delta(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

fn oracle_tolerance(panels: usize) -> ToleranceSpec {
    ToleranceSpec {
        rel: 1e-10,
        abs: 1e-15,
        max_evals: 15 * panels + 2_000_000,
    }
}

fn uniform_breaks(lo: f64, hi: f64, width: f64) -> Vec<f64> {
    let n = ((hi - lo) / width).ceil().max(1.0) as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Uniform breaks of spacing `width` restricted to coarse cells where
/// `|mismatch|` may fall below `reach`, given `|mismatch'| <= slope_bound`.
fn pruned_breaks(lo: f64, hi: f64, width: f64, reach: f64, slope_bound: f64, mismatch: impl Fn(f64) -> f64) -> Vec<f64> {
    let coarse = uniform_breaks(lo, hi, (4096.0 * width).min(hi - lo));
    let mut breaks: Vec<f64> = Vec::new();
    for cell in coarse.windows(2) {
        let (a, b) = (cell[0], cell[1]);
        if mismatch(0.5 * (a + b)).abs() > reach + 0.5 * slope_bound * (b - a) {
            continue;
        }
        let fine = uniform_breaks(a, b, width);
        let skip = usize::from(breaks.last() == Some(&a));
        breaks.extend_from_slice(&fine[skip..fine.len() - 1]);
        breaks.push(b);
    }
    breaks
}

/// Golden-rule rate with the energy delta replaced by a Gaussian of width
/// `sigma`. Independent of the root solvers; used as a cross-check.
///
/// An atom at rest is integrated over frequency (with `ω = Ω + s²` to
/// remove the band-edge singularity), a moving atom over wavenumber.
pub fn golden_rule_quadrature_oracle(
    atom: &AtomParams,
    geometry: &WaveguideGeometry,
    sigma: f64,
) -> Result<OracleEstimate> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    atom.validate(geometry)?;
    let mass = atom.rest_energy;
    let reach = atom.initial_energy() + 20.0 * sigma;
    let mut total = OracleEstimate { value: 0.0, error: 0.0 };
    for mode in coupled_modes(atom, geometry, reach) {
        let strength = coupling_strength(atom, &mode, geometry);
        let cutoff = mode.cutoff;
        let part = if atom.p_z == 0.0 {
            let s_max = (reach - cutoff).sqrt();
            let breaks = uniform_breaks(0.0, s_max, 0.25 * sigma);
            let tol = oracle_tolerance(breaks.len());
            integrate_adaptive_breaks(
                |s| {
                    let omega = cutoff + s * s;
                    let mismatch = atom.omega_a - omega - s * s * (omega + cutoff) / (2.0 * mass);
                    let value = 8.0 * PI * strength / (2.0 * cutoff + s * s).sqrt() * nascent_delta(mismatch, sigma);
                    Complex64::new(value, 0.0)
                },
                &breaks,
                &tol,
            )?
        } else {
            let k_max = reach / (1.0 - atom.velocity().abs().min(0.5));
            let energy = atom.initial_energy();
            let slope_bound = 1.0 + (k_max + atom.p_z.abs()) / mass;
            let breaks = pruned_breaks(-k_max, k_max, 0.25 * sigma, 20.0 * sigma, slope_bound, |k| {
                energy - recoil_dispersion(&mode, atom.p_z, mass, k)
            });
            if breaks.len() < 2 {
                continue;
            }
            let tol = oracle_tolerance(breaks.len());
            integrate_adaptive_breaks(
                |k| {
                    let omega = mode.dispersion(k);
                    let mismatch = energy - recoil_dispersion(&mode, atom.p_z, mass, k);
                    Complex64::new(2.0 * PI * strength / omega * nascent_delta(mismatch, sigma), 0.0)
                },
                &breaks,
                &tol,
            )?
        };
        total.value += part.value.re;
        total.error += part.error;
    }
    Ok(total)
}

/// `(4 Γ(σ/2) − Γ(σ)) / 3`, removing the `O(σ²)` smearing error.
pub fn golden_rule_oracle_extrapolated(
    atom: &AtomParams,
    geometry: &WaveguideGeometry,
    sigma: f64,
) -> Result<OracleEstimate> {
    let coarse = golden_rule_quadrature_oracle(atom, geometry, sigma)?;
    let fine = golden_rule_quadrature_oracle(atom, geometry, 0.5 * sigma)?;
    Ok(OracleEstimate {
        value: (4.0 * fine.value - coarse.value) / 3.0,
        error: (fine.value - coarse.value).abs() / 3.0 + fine.error + coarse.error,
    })
}

/// Which exact rate a recoil coefficient is extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoilRate {
    AtRest,
    Moving,
}

/// First-order coefficient `c` in `Γ/Γ_f = 1 + c·ω_A/Mc² + …`, measured by
/// Richardson extrapolation of the exact rate at fixed `ω_A` and `p_z`.
///
/// Steps in `ω_A/Mc²` start at `eps0` and halve `levels` times.
pub fn recoil_coefficient(
    atom: &AtomParams,
    geometry: &WaveguideGeometry,
    rate: RecoilRate,
    eps0: f64,
    levels: usize,
) -> Result<OrderCoefficient> {
    let fixed = fixed_atom_rate(atom, geometry)?;
    if fixed.no_active_channel {
        return Err(Error::InvalidArgument("no active channel to expand".into()));
    }
    let base = match rate {
        RecoilRate::AtRest => atom.at_rest(),
        RecoilRate::Moving => *atom,
    };
    let failure = std::cell::RefCell::new(None);
    let ratio = |eps: f64| {
        if eps == 0.0 {
            return 1.0;
        }
        let scaled = AtomParams {
            rest_energy: base.omega_a / eps,
            ..base
        };
        let report = match rate {
            RecoilRate::AtRest => rate_at_rest_exact(&scaled, geometry),
            RecoilRate::Moving => rate_moving_exact(&scaled, geometry),
        };
        match report {
            Ok(r) => r.gamma_total_exact / fixed.gamma,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let extracted = extract_order_coefficient(ratio, eps0, levels);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(extracted?)
}
