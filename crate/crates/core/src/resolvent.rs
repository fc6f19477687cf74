//! Level shift of the excited state and the survival amplitude obtained by
//! inverting the resolvent along a line in the upper half plane.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{mode_couplings, AtomParams, ModeCoupling};
use crate::error::{Error, Result};
use crate::model::WaveguideGeometry;
use crate::numerics::{
    find_root_bracketed, integrate_adaptive, integrate_adaptive_breaks, integrate_principal_value_with_residue,
    OscillatoryPanels, PanelOptions, ToleranceSpec,
};
use crate::rates::{fixed_atom_rate, recoil_dispersion, shell_minimum, shell_roots};

pub use crate::rates::{energy_shell_roots, ShellRoot};

/// Residual of `ln P` about the fitted line above which a trace is
/// reported as non-exponential.
pub const NON_EXPONENTIAL_RESIDUAL: f64 = 0.15;

/// Relative disagreement between the fitted rate and the on-shell width
/// `−2 Im B(E₀ + i0)` above which a trace is reported as non-exponential.
pub const POLE_RATE_MISMATCH: f64 = 0.25;

/// `Γ·t_max` below which a trace carries too little decay to fit.
pub const LOW_SIGNAL_DECAY: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelShift {
    pub q: Complex64,
    pub value: Complex64,
    pub per_mode: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy)]
struct ModeShell {
    coupling: ModeCoupling,
    k_min: f64,
    threshold: f64,
    /// Second derivative of the recoil dispersion at `k_min`.
    curvature: f64,
}

/// Per-mode level-shift integrals for one atom.
#[derive(Debug, Clone)]
struct ShiftEngine {
    p: f64,
    mass: f64,
    modes: Vec<ModeShell>,
    tol: ToleranceSpec,
}

struct Window {
    root: f64,
    half: f64,
    lo: f64,
    hi: f64,
    slope: f64,
    weight: f64,
}

impl Window {
    fn contains(&self, k: f64) -> bool {
        k > self.lo && k < self.hi
    }
}

impl ShiftEngine {
    /// Modes up to `max(ω_max, initial energy)` so that every open channel
    /// is part of the sum.
    fn new(atom: &AtomParams, geometry: &WaveguideGeometry, omega_max: f64, tol: ToleranceSpec) -> Result<Self> {
        atom.validate(geometry)?;
        tol.validate()?;
        if !(omega_max > 0.0) {
            return Err(Error::InvalidArgument(format!("omega_max must be positive, got {omega_max}")));
        }
        let (p, mass) = (atom.p_z, atom.rest_energy);
        let cap = omega_max.max(atom.initial_energy());
        let mut modes = Vec::new();
        for coupling in mode_couplings(atom, geometry, cap) {
            if coupling.strength == 0.0 {
                continue;
            }
            let mode = coupling.mode;
            let k_min = shell_minimum(&mode, p, mass)?;
            let omega = mode.dispersion(k_min);
            modes.push(ModeShell {
                coupling,
                k_min,
                threshold: recoil_dispersion(&mode, p, mass, k_min),
                curvature: mode.cutoff * mode.cutoff / omega.powi(3) + 1.0 / mass,
            });
        }
        Ok(Self { p, mass, modes, tol })
    }

    fn thresholds(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.threshold).collect()
    }

    fn windows(&self, m: &ModeShell, x: f64) -> Result<Vec<Window>> {
        if !(x > m.threshold) {
            return Ok(Vec::new());
        }
        let mode = m.coupling.mode;
        Ok(shell_roots(&mode, self.p, self.mass, x)?
            .into_iter()
            .map(|r| {
                let half = 0.5 * (r.k - m.k_min).abs();
                Window {
                    root: r.k,
                    half,
                    lo: r.k - half,
                    hi: r.k + half,
                    slope: -r.slope,
                    weight: m.coupling.strength / r.omega,
                }
            })
            .collect())
    }

    fn seed_breaks(m: &ModeShell, gap: f64, windows: &[Window], offset: f64) -> (Vec<f64>, f64, f64, f64) {
        let mut breaks = vec![m.k_min];
        let core = (2.0 * gap / m.curvature).sqrt();
        for scale in [1.0, 10.0, 100.0] {
            breaks.push(m.k_min - scale * core);
            breaks.push(m.k_min + scale * core);
        }
        for w in windows {
            breaks.extend([w.lo, w.root, w.hi]);
            let mut d = offset / w.slope.abs();
            while d > 0.0 && d < w.half {
                breaks.push(w.root - d);
                breaks.push(w.root + d);
                d *= 10.0;
            }
        }
        let first = breaks.iter().copied().fold(f64::INFINITY, f64::min);
        let last = breaks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (last - first).max(m.coupling.mode.cutoff).max(1.0);
        let (lo, hi) = (first - span, last + span);
        breaks.push(lo);
        breaks.push(hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        (breaks, lo, hi, span)
    }

    /// `∫ g` over `(−∞, lo]` and `[hi, ∞)` with `k = edge ± L (1 − u)/u`.
    fn tails(&self, g: impl Fn(f64) -> Complex64, lo: f64, hi: f64, span: f64) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for (edge, dir) in [(hi, 1.0), (lo, -1.0)] {
            let mapped = |u: f64| {
                if u < 1e-100 {
                    return Complex64::new(0.0, 0.0);
                }
                let k = edge + dir * span * (1.0 - u) / u;
                if !k.is_finite() || k.abs() > 1e150 {
                    return Complex64::new(0.0, 0.0);
                }
                g(k) * (span / (u * u))
            };
            total += integrate_adaptive(mapped, 0.0, 1.0, &self.tol)?.value;
        }
        Ok(total)
    }

    /// `∫ dk |g_k|² / (q − ε(k))` for `Im q > 0`.
    fn mode_complex(&self, m: &ModeShell, q: Complex64) -> Result<Complex64> {
        let mode = m.coupling.mode;
        let (p, mass, strength) = (self.p, self.mass, m.coupling.strength);
        let eps = |k: f64| recoil_dispersion(&mode, p, mass, k);
        let slope = |k: f64| k / mode.dispersion(k) + (k - p) / mass;
        let windows = self.windows(m, q.re)?;
        let gap = (q.re - m.threshold).abs().max(q.im);
        let (breaks, lo, hi, span) = Self::seed_breaks(m, gap, &windows, q.im);

        let integrand = |k: f64| {
            let mut num = strength / mode.dispersion(k);
            for w in &windows {
                if w.contains(k) {
                    num -= w.weight * slope(k) / w.slope;
                }
            }
            Complex64::new(num, 0.0) / (q - eps(k))
        };
        let mut total = integrate_adaptive_breaks(integrand, &breaks, &self.tol)?.value;
        for w in &windows {
            let left = (q - eps(w.lo)).ln();
            let right = (q - eps(w.hi)).ln();
            total += (left - right) * (w.weight / w.slope);
        }
        total += self.tails(|k| Complex64::new(strength / mode.dispersion(k), 0.0) / (q - eps(k)), lo, hi, span)?;
        Ok(total)
    }

    /// Boundary value on the real axis approached from above: principal
    /// value plus the on-shell delta contributions.
    fn mode_onshell(&self, m: &ModeShell, x: f64) -> Result<Complex64> {
        if x == m.threshold {
            return Err(Error::InvalidArgument(format!(
                "level shift diverges at the threshold {x} of {}",
                m.coupling.mode.label()
            )));
        }
        let mode = m.coupling.mode;
        let (p, mass, strength) = (self.p, self.mass, m.coupling.strength);
        let real = |k: f64| strength / mode.dispersion(k) / (x - recoil_dispersion(&mode, p, mass, k));
        let windows = self.windows(m, x)?;
        let (breaks, lo, hi, span) = Self::seed_breaks(m, (x - m.threshold).abs(), &windows, 0.0);
        let regular: Vec<f64> = breaks
            .into_iter()
            .filter(|&k| !windows.iter().any(|w| w.contains(k)))
            .collect();

        let mut principal = 0.0;
        for pair in regular.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || windows.iter().any(|w| a == w.lo && b == w.hi) {
                continue;
            }
            principal += integrate_adaptive_breaks(|k| Complex64::new(real(k), 0.0), &[a, b], &self.tol)?
                .value
                .re;
        }
        let mut absorptive = 0.0;
        for w in &windows {
            principal += integrate_principal_value_with_residue(
                real,
                w.root,
                -w.weight / w.slope,
                w.lo,
                w.hi,
                &self.tol,
            )?;
            absorptive -= PI * w.weight / w.slope.abs();
        }
        principal += self.tails(|k| Complex64::new(real(k), 0.0), lo, hi, span)?.re;
        Ok(Complex64::new(principal, absorptive))
    }

    fn per_mode(&self, q: Complex64) -> Result<Vec<Complex64>> {
        if !(q.re.is_finite() && q.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("q must be finite, got {q}")));
        }
        self.modes
            .iter()
            .map(|m| {
                if q.im > 0.0 {
                    self.mode_complex(m, q)
                } else if q.im < 0.0 {
                    Ok(self.mode_complex(m, q.conj())?.conj())
                } else {
                    self.mode_onshell(m, q.re)
                }
            })
            .collect()
    }

    fn total(&self, q: Complex64) -> Result<Complex64> {
        Ok(self.per_mode(q)?.into_iter().sum())
    }
}

fn shift_from_parts(q: Complex64, per_mode: Vec<Complex64>) -> LevelShift {
    LevelShift {
        q,
        value: per_mode.iter().sum(),
        per_mode,
    }
}

/// `B(q) = Σ_j ∫ dk |g_jk|² / (q − ω_jk − (p_z − k)²/2M)`.
///
/// `Im q > 0` is the physical sheet; `Im q < 0` returns the conjugate
/// mirror and `Im q = 0` the boundary value from above.
pub fn level_shift(atom: &AtomParams, geometry: &WaveguideGeometry, q: Complex64, omega_max: f64) -> Result<LevelShift> {
    let engine = ShiftEngine::new(atom, geometry, omega_max, ToleranceSpec::default())?;
    Ok(shift_from_parts(q, engine.per_mode(q)?))
}

/// `B(ω + i0)` from a principal-value integral and the on-shell roots.
pub fn level_shift_onshell(
    atom: &AtomParams,
    geometry: &WaveguideGeometry,
    omega: f64,
    omega_max: f64,
) -> Result<LevelShift> {
    level_shift(atom, geometry, Complex64::new(omega, 0.0), omega_max)
}

/// Least-squares fit of `−ln P = c + Γ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of `ln P` from the fitted line.
    pub residual: f64,
    pub points: usize,
}

/// Fits the points with `window.0 ≤ t ≤ window.1` and `P ≥ 1e-12`.
pub fn fit_decay(times: &[f64], survival: &[f64], window: (f64, f64)) -> DecayFit {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(survival)
        .filter(|(&t, &p)| t >= window.0 && t <= window.1 && p >= 1e-12)
        .map(|(&t, &p)| (t, -p.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return DecayFit {
            rate: 0.0,
            intercept: 0.0,
            residual: 0.0,
            points: n,
        };
    }
    let nf = n as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t / nf, b + y / nf));
    let sxx: f64 = pts.iter().map(|&(t, _)| (t - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|&(t, y)| (t - mt) * (y - my)).sum();
    let rate = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - rate * mt;
    let residual = (pts.iter().map(|&(t, y)| (y - intercept - rate * t).powi(2)).sum::<f64>() / nf).sqrt();
    DecayFit {
        rate,
        intercept,
        residual,
        points: n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsTrace {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub fitted_rate: f64,
    pub fit_window: (f64, f64),
    pub fit_residual: f64,
    pub fit_points: usize,
    /// `−2 Im B(E₀ + i0)`, the decay rate implied by the resonance pole.
    pub resonance_width: f64,
    pub non_exponential: bool,
    pub low_signal: bool,
    pub contour_offset: f64,
}

/// Survival amplitude of the excited state, prepared once per scenario.
///
/// The inverse transform runs along `Im q = η`. The approximate pole
/// `E₀ + B(E₀ + i0)` is subtracted and transformed analytically; the
/// smooth remainder is expanded in Legendre panels and transformed with a
/// Filon-type rule.
#[derive(Debug, Clone)]
pub struct SurvivalSolver {
    initial_energy: f64,
    pole: Complex64,
    contour_offset: f64,
    bound_state: Option<f64>,
    panels: Option<OscillatoryPanels>,
}

impl SurvivalSolver {
    pub fn new(atom: &AtomParams, geometry: &WaveguideGeometry, omega_max: f64) -> Result<Self> {
        Self::with_tolerance(atom, geometry, omega_max, ToleranceSpec::default())
    }

    pub fn with_tolerance(
        atom: &AtomParams,
        geometry: &WaveguideGeometry,
        omega_max: f64,
        tol: ToleranceSpec,
    ) -> Result<Self> {
        let engine = ShiftEngine::new(atom, geometry, omega_max, tol)?;
        let e0 = atom.initial_energy();
        if engine.modes.is_empty() {
            return Ok(Self {
                initial_energy: e0,
                pole: Complex64::new(e0, 0.0),
                contour_offset: 1e-6 * atom.omega_a,
                bound_state: None,
                panels: None,
            });
        }
        let shift = engine.total(Complex64::new(e0, 0.0))?;
        let pole = Complex64::new(e0, 0.0) + shift;
        let width = -2.0 * shift.im;
        let gamma_fixed = fixed_atom_rate(atom, geometry)?.gamma;
        let reference = if gamma_fixed > 0.0 { gamma_fixed } else { width };
        let eta = if reference > 0.0 { 1e-3 * reference } else { 1e-6 * atom.omega_a };

        let thresholds = engine.thresholds();
        let lowest = thresholds.iter().copied().fold(f64::INFINITY, f64::min);
        let bound_state = find_bound_state(&engine, e0, lowest)?;

        let mut seeds = Vec::new();
        let mut around = |x: f64, scales: &[f64]| {
            seeds.push(x);
            for s in scales {
                seeds.push(x - s);
                seeds.push(x + s);
            }
        };
        for &th in &thresholds {
            around(th, &[eta, 10.0 * eta, 100.0 * eta]);
        }
        if let Some(xb) = bound_state {
            around(xb, &[eta, 10.0 * eta, 100.0 * eta]);
        }
        let lorentz = width.max(eta);
        around(pole.re, &[0.1 * lorentz, 0.5 * lorentz, 2.0 * lorentz, 10.0 * lorentz]);
        seeds.sort_by(f64::total_cmp);
        seeds.dedup();

        let remainder = |x: f64| -> Result<Complex64> {
            let q = Complex64::new(x, eta);
            let b = engine.total(q)?;
            Ok((b - shift) / ((q - e0 - b) * (q - pole)))
        };

        let first = seeds[0];
        let last = *seeds.last().expect("seeds are nonempty");
        let mut step = (last - first).max(1.0);
        let mut left = Vec::new();
        let mut x = first;
        loop {
            x -= step;
            step *= 2.0;
            left.push(x);
            if remainder(x)?.norm() * (x - pole.re).abs() < 1e-13 || x.abs() > 1e16 {
                break;
            }
        }
        let mut step = (last - first).max(1.0);
        let mut x = last;
        loop {
            x += step;
            step *= 2.0;
            seeds.push(x);
            if remainder(x)?.norm() * (x - pole.re).abs() < 1e-13 || x.abs() > 1e16 {
                break;
            }
        }
        left.reverse();
        left.extend(seeds);
        let breaks = left;

        let opts = PanelOptions {
            abs_tol: 1e-12,
            max_panels: 200_000,
            min_width: 1e-13 * (1.0 + e0.abs()),
        };
        let parts = breaks
            .par_windows(2)
            .map(|w| OscillatoryPanels::build(remainder, w, &opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            initial_energy: e0,
            pole,
            contour_offset: eta,
            bound_state,
            panels: Some(OscillatoryPanels::concat(parts)),
        })
    }

    pub fn contour_offset(&self) -> f64 {
        self.contour_offset
    }

    /// Subtracted pole `E₀ + B(E₀ + i0)`.
    pub fn resonance_pole(&self) -> Complex64 {
        self.pole
    }

    /// `−2 Im B(E₀ + i0)`.
    pub fn resonance_width(&self) -> f64 {
        -2.0 * self.pole.im
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    /// Real pole of the resolvent below the lowest coupled threshold.
    pub fn bound_state_energy(&self) -> Option<f64> {
        self.bound_state
    }

    pub fn panel_count(&self) -> usize {
        self.panels.as_ref().map_or(0, |p| p.len())
    }

    /// Accumulated Legendre truncation estimate of the contour remainder.
    pub fn quadrature_error(&self) -> f64 {
        self.panels.as_ref().map_or(0.0, |p| p.error_estimate)
    }

    pub fn amplitude(&self, t: f64) -> Result<Complex64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
        }
        let pole_part = (Complex64::new(0.0, -t) * self.pole).exp();
        let Some(panels) = &self.panels else {
            return Ok(pole_part);
        };
        let transform = panels.fourier(t) * (self.contour_offset * t).exp();
        Ok(pole_part - transform / Complex64::new(0.0, 2.0 * PI))
    }

    /// `P(t) = |A(t)|²` on `steps + 1` uniform times in `[0, t_max]`.
    pub fn trace(&self, t_max: f64, steps: usize) -> Result<DynamicsTrace> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
        }
        if steps < 16 {
            return Err(Error::InvalidArgument(format!("steps must be >= 16, got {steps}")));
        }
        let times: Vec<f64> = (0..=steps).map(|i| t_max * i as f64 / steps as f64).collect();
        let survival = times
            .par_iter()
            .map(|&t| self.amplitude(t).map(|a| a.norm_sqr()))
            .collect::<Result<Vec<f64>>>()?;
        let window = (0.2 * t_max, 0.8 * t_max);
        let fit = fit_decay(&times, &survival, window);
        let low_signal = fit.points < 2 || fit.rate.abs() * t_max < LOW_SIGNAL_DECAY;
        let width = self.resonance_width();
        let mismatch = width > 0.0 && (fit.rate / width - 1.0).abs() > POLE_RATE_MISMATCH;
        Ok(DynamicsTrace {
            times,
            survival,
            fitted_rate: fit.rate,
            fit_window: window,
            fit_residual: fit.residual,
            fit_points: fit.points,
            resonance_width: width,
            non_exponential: !low_signal && (fit.residual > NON_EXPONENTIAL_RESIDUAL || mismatch),
            low_signal,
            contour_offset: self.contour_offset,
        })
    }
}

/// Solves `x = E₀ + B(x)` below the lowest threshold, where `B` is real
/// and diverges towards the band edge.
fn find_bound_state(engine: &ShiftEngine, e0: f64, lowest: f64) -> Result<Option<f64>> {
    let failure = RefCell::new(None);
    let gap = |x: f64| match engine.total(Complex64::new(x, 0.0)) {
        Ok(b) => x - e0 - b.re,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let scale = lowest.abs().max(1.0);
    let mut delta = 1e-2 * scale;
    let hi = loop {
        let x = lowest - delta;
        let g = gap(x);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        if g > 0.0 {
            break x;
        }
        delta *= 0.1;
        if delta < 1e-13 * scale {
            return Ok(None);
        }
    };
    let mut reach = (e0 - lowest).abs().max(1.0);
    let lo = loop {
        let x = lowest - reach;
        let g = gap(x);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        if g < 0.0 {
            break x;
        }
        reach *= 2.0;
        if reach > 1e16 {
            return Ok(None);
        }
    };
    let tol = ToleranceSpec {
        rel: 1e-14,
        abs: 0.0,
        max_evals: 400,
    };
    let root = find_root_bracketed(&gap, lo, hi, &tol);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    Ok(Some(root?))
}

pub fn survival_amplitude(
    atom: &AtomParams,
    geometry: &WaveguideGeometry,
    omega_max: f64,
    t: f64,
) -> Result<Complex64> {
    SurvivalSolver::new(atom, geometry, omega_max)?.amplitude(t)
}

pub fn survival_trace(
    atom: &AtomParams,
    geometry: &WaveguideGeometry,
    omega_max: f64,
    t_max: f64,
    steps: usize,
) -> Result<DynamicsTrace> {
    SurvivalSolver::new(atom, geometry, omega_max)?.trace(t_max, steps)
}
