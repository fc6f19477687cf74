//! Acceptance suite: one pass/fail line per criterion, non-zero exit on
//! any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use waveguide_se::coupling::{coupling_strength, transverse_profile, AtomParams};
use waveguide_se::model::{enumerate_tm_modes, TransverseMode, WaveguideGeometry};
use waveguide_se::numerics::{extract_order_coefficient, find_root_bracketed, ToleranceSpec};
use waveguide_se::rates::{
    emitted_frequency_at_rest, emitted_frequency_at_rest_first_order, fixed_atom_rate, golden_rule_oracle_extrapolated,
    rate_at_rest_exact, rate_moving_exact, recoil_coefficient, resonance_roots_moving, stationary_mode_rate, Method,
    RecoilRate,
};
use waveguide_se::resolvent::{fit_decay, level_shift_onshell, SurvivalSolver};

/// Mode cap that keeps only the open TM11 channel on the canonical guide.
const OMEGA_MAX: f64 = 11.0;

struct Outcome {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
            notes: Vec::new(),
        }
    }

    fn note(mut self, line: impl Into<String>) -> Self {
        self.notes.push(line.into());
        self
    }
}

type Check = fn() -> Result<Outcome, String>;

fn guide() -> WaveguideGeometry {
    WaveguideGeometry::new(1.0, 0.5).unwrap()
}

fn lowest_cutoff() -> f64 {
    PI * 5f64.sqrt()
}

fn canonical() -> AtomParams {
    let w = 1.5 * lowest_cutoff();
    AtomParams {
        omega_a: w,
        rest_energy: 100.0 * w,
        dipole: 0.1,
        x0: 0.5,
        y0: 0.25,
        p_z: 0.0,
    }
}

fn tm11() -> TransverseMode {
    TransverseMode::new(&guide(), 1, 1).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn selection_rule() -> Result<Outcome, String> {
    let g = guide();
    let mut atom = canonical();
    atom.omega_a = 40.0;
    atom.rest_energy = 100.0 * atom.omega_a;
    let modes = enumerate_tm_modes(&g, 60.0);
    let even = |m: &TransverseMode| m.m % 2 == 0 || m.n % 2 == 0;
    let mut violations = 0;
    let mut even_count = 0;
    for mode in modes.iter().filter(|m| even(m)) {
        even_count += 1;
        if transverse_profile(&atom, mode, &g) != 0.0 || coupling_strength(&atom, mode, &g) != 0.0 {
            violations += 1;
        }
    }
    let fixed = fixed_atom_rate(&atom, &g).map_err(err)?;
    violations += fixed.active_modes.iter().filter(|m| even(m)).count();
    let mut odd_open = 0;
    for report in [
        rate_at_rest_exact(&atom, &g).map_err(err)?,
        rate_moving_exact(&AtomParams { p_z: 0.03 * atom.rest_energy, ..atom }, &g).map_err(err)?,
    ] {
        violations += report
            .entries
            .iter()
            .filter(|e| even(&e.mode) && e.gamma_contribution != 0.0)
            .count();
        odd_open = odd_open.max(
            report
                .entries_by(Method::ExactRoot)
                .filter(|e| !even(&e.mode) && e.gamma_contribution > 0.0)
                .count(),
        );
    }
    Ok(Outcome::new(
        violations == 0 && even_count > 0 && odd_open > 0,
        format!("{even_count} even-index modes checked, {violations} nonzero contributions, {odd_open} odd-mode entries emit"),
    ))
}

fn stationary_oracle() -> Result<Outcome, String> {
    let g = guide();
    let mut atom = canonical();
    atom.rest_energy = 1e8 * atom.omega_a;
    let closed = stationary_mode_rate(&atom, &tm11(), &g).map_err(err)?;
    let oracle = golden_rule_oracle_extrapolated(&atom, &g, 1e-3 * atom.omega_a).map_err(err)?;
    let d = rel(oracle.value, closed);
    Ok(Outcome::new(
        d < 1e-3,
        format!("closed form {closed:.10}, quadrature {:.10}, rel diff {d:.2e} (tol 1e-3)", oracle.value),
    ))
}

fn recoil_root() -> Result<Outcome, String> {
    let atom = canonical();
    let mode = tm11();
    let (w, c, mass) = (atom.omega_a, mode.cutoff, atom.rest_energy);
    let closed = emitted_frequency_at_rest(&atom, &mode).map_err(err)?;
    let delta_arg = |omega: f64| w - omega - (omega - c) * (omega + c) / (2.0 * mass);
    let residual = delta_arg(closed).abs() / closed;
    let tol = ToleranceSpec::new(1e-15, 0.0, 10_000).map_err(err)?;
    let numeric = find_root_bracketed(delta_arg, c, w, &tol).map_err(err)?;
    let d = rel(numeric, closed);
    Ok(Outcome::new(
        residual <= 1e-12 && d <= 1e-10,
        format!("w_R = {closed:.15}, residual {residual:.1e} (tol 1e-12), bracketed root diff {d:.1e} (tol 1e-10)"),
    ))
}

fn first_order_frequency() -> Result<Outcome, String> {
    let mode = tm11();
    let diff = |scale: f64| -> Result<f64, String> {
        let mut atom = canonical();
        atom.rest_energy *= scale;
        let exact = emitted_frequency_at_rest(&atom, &mode).map_err(err)?;
        let series = emitted_frequency_at_rest_first_order(&atom, &mode).map_err(err)?;
        Ok((exact - series).abs())
    };
    let diffs = [diff(1.0)?, diff(2.0)?, diff(4.0)?, diff(8.0)?];
    let ratios: Vec<f64> = diffs.windows(2).map(|p| p[0] / p[1]).collect();
    let ok = ratios.iter().all(|r| (r / 4.0 - 1.0).abs() <= 0.2);
    Ok(Outcome::new(
        ok,
        format!(
            "|exact - first order| = {:.3e} .. {:.3e}, shrink ratios per doubling {:.4} {:.4} {:.4} (want 4 +/- 20%)",
            diffs[0], diffs[3], ratios[0], ratios[1], ratios[2]
        ),
    ))
}

fn cutoff_divergence() -> Result<Outcome, String> {
    let g = guide();
    let mode = tm11();
    let c = mode.cutoff;
    let n = 40;
    let (lo, hi) = (1.001f64, 1.5f64);
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let factor = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        let mut atom = canonical();
        atom.omega_a = factor * c;
        let gamma = stationary_mode_rate(&atom, &mode, &g).map_err(err)?;
        pts.push(((atom.omega_a * atom.omega_a - c * c).ln(), gamma.ln()));
    }
    let slope = least_squares_slope(&pts);
    Ok(Outcome::new(
        (slope + 0.5).abs() <= 0.02,
        format!("log-log slope {slope:.6} over w_A in [1.001, 1.5] cutoff (want -0.50 +/- 0.02)"),
    ))
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn doppler_split() -> Result<Outcome, String> {
    let mode = tm11();
    let rest = canonical();
    let mass = rest.rest_energy;
    let at_rest = emitted_frequency_at_rest(&rest, &mode).map_err(err)?;
    let roots = |p_z: f64| -> Result<(f64, f64), String> {
        let r = resonance_roots_moving(&AtomParams { p_z, ..rest }, &mode).map_err(err)?;
        match (r.omega_plus, r.omega_minus) {
            (Some(p), Some(m)) => Ok((p, m)),
            _ => Err("missing resonance root".into()),
        }
    };
    let (plus, minus) = roots(0.05 * mass)?;
    let (plus_rev, minus_rev) = roots(-0.05 * mass)?;
    let ordered = plus > at_rest && at_rest > minus;
    let swapped = plus_rev == minus && minus_rev == plus;

    // Scale velocity and inverse mass together by eps; the first-order
    // sqrt form is exactly the eps-derivative of the roots at eps = 0.
    let (w, c) = (rest.omega_a, mode.cutoff);
    let k_a = ((w - c) * (w + c)).sqrt();
    let v0 = 0.05;
    let root_at = |eps: f64, upper: bool| -> f64 {
        if eps == 0.0 {
            return w;
        }
        let m = mass / eps;
        let (p, q) = roots_scaled(&rest, &mode, v0 * eps * m, m);
        if upper {
            p
        } else {
            q
        }
    };
    let series_slope = |sign: f64| sign * v0 * k_a - k_a * k_a / (2.0 * mass);
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (upper, sign, label) in [(true, 1.0, "w+"), (false, -1.0, "w-")] {
        let coef = extract_order_coefficient(|e| root_at(e, upper), 1.0, 6).map_err(err)?;
        let want = series_slope(sign);
        let d = rel(coef.coefficient, want);
        worst = worst.max(d);
        let first = w + want;
        let actual = if upper { plus } else { minus };
        lines.push(format!(
            "{label}: root {actual:.10}, sqrt-form {first:.10}, remainder {:.2e}; extracted slope {:.10} vs sqrt-form {want:.10} (rel {d:.1e})",
            actual - first,
            coef.coefficient
        ));
    }
    let printed_plus = w + v0 * k_a * k_a - k_a * k_a / (2.0 * mass);
    let out = Outcome::new(
        ordered && swapped && worst < 1e-6,
        format!(
            "w+ = {plus:.10} > w_rest = {at_rest:.10} > w- = {minus:.10}; reversal swaps roots exactly: {swapped}; sqrt-form slope rel err {worst:.1e} (tol 1e-6)"
        ),
    );
    let out = lines.into_iter().fold(out, Outcome::note);
    Ok(out.note(format!("printed squared form would give w+ = {printed_plus:.6}, off by {:.3e}", printed_plus - plus)))
}

fn roots_scaled(base: &AtomParams, mode: &TransverseMode, p_z: f64, mass: f64) -> (f64, f64) {
    let atom = AtomParams {
        p_z,
        rest_energy: mass,
        ..*base
    };
    let r = resonance_roots_moving(&atom, mode).expect("roots exist");
    (r.omega_plus.expect("upper root"), r.omega_minus.expect("lower root"))
}

fn momentum_independence() -> Result<Outcome, String> {
    let g = guide();
    let base = canonical();
    let mass = base.rest_energy;
    let gamma = |p: f64| -> Result<f64, String> {
        Ok(rate_moving_exact(&AtomParams { p_z: p, ..base }, &g).map_err(err)?.gamma_total_exact)
    };
    let g0 = gamma(0.0)?;
    let steps = [0.01, 0.02, 0.04];
    let mut derivs = Vec::new();
    let mut even = Vec::new();
    for s in steps {
        let h = s * mass;
        let (up, down) = (gamma(h)?, gamma(-h)?);
        derivs.push((s, (up - down) / (2.0 * h) * mass / g0));
        even.push((s, (0.5 * (up + down) / g0 - 1.0)));
    }
    // Quadratic through the three central differences; its intercept is
    // the extrapolated slope at p_z = 0.
    let intercept = quadratic_intercept(&derivs);
    let curvature = quadratic_intercept(&even.iter().map(|&(s, y)| (s, y / (s * s))).collect::<Vec<_>>());
    let scale = derivs.iter().map(|d| d.1.abs()).fold(0.0, f64::max);
    Ok(Outcome::new(
        intercept.abs() <= 1e-9,
        format!(
            "Mc/G_f dG_M/dp_z at 0: {intercept:.2e} (central differences {:.1e} {:.1e} {:.1e}, tol 1e-9)",
            derivs[0].1, derivs[1].1, derivs[2].1
        ),
    )
    .note(format!(
        "leading momentum dependence is quadratic: G_M/G_f - 1 ~ {curvature:.4} (p_z/Mc)^2; largest odd part {scale:.1e}"
    )))
}

fn quadratic_intercept(pts: &[(f64, f64)]) -> f64 {
    let [(x0, y0), (x1, y1), (x2, y2)] = [pts[0], pts[1], pts[2]];
    y0 * x1 * x2 / ((x0 - x1) * (x0 - x2)) + y1 * x0 * x2 / ((x1 - x0) * (x1 - x2)) + y2 * x0 * x1 / ((x2 - x0) * (x2 - x1))
}

fn weisskopf_wigner_chain() -> Result<Outcome, String> {
    let g = guide();
    let atom = canonical();
    let gamma = rate_at_rest_exact(&atom, &g).map_err(err)?.gamma_total_exact;
    let width = -2.0 * level_shift_onshell(&atom, &g, atom.initial_energy(), OMEGA_MAX).map_err(err)?.value.im;
    let solver = SurvivalSolver::new(&atom, &g, OMEGA_MAX).map_err(err)?;
    let trace = solver.trace(5.0 / gamma, 400).map_err(err)?;
    let fit = fit_decay(&trace.times, &trace.survival, (1.0 / gamma, 5.0 / gamma));
    let pairs = [rel(width, gamma), rel(fit.rate, gamma), rel(fit.rate, width)];
    let worst = pairs.iter().cloned().fold(0.0, f64::max);
    let pointwise = trace
        .times
        .iter()
        .zip(&trace.survival)
        .filter(|(t, _)| **t >= 1.0 / gamma)
        .map(|(t, p)| (p / (-gamma * t).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(Outcome::new(
        worst <= 0.02,
        format!(
            "golden rule {gamma:.6}, -2 Im B {width:.6}, fitted on [1/G, 5/G] {:.6}; worst pairwise {worst:.2e} (tol 2e-2)",
            fit.rate
        ),
    )
    .note(format!(
        "default fit window [{:.3}, {:.3}]: rate {:.6} ({:+.2}%), residual {:.3}, non-exponential {}",
        trace.fit_window.0,
        trace.fit_window.1,
        trace.fitted_rate,
        100.0 * (trace.fitted_rate / gamma - 1.0),
        trace.fit_residual,
        trace.non_exponential
    ))
    .note(format!(
        "pointwise max |P/exp(-Gt) - 1| on [1/G, 5/G] = {pointwise:.3} (band-edge bound state beating; not a criterion)"
    )))
}

fn unitarity_and_limits() -> Result<Outcome, String> {
    let g = guide();
    let atom = canonical();
    let gamma = rate_at_rest_exact(&atom, &g).map_err(err)?.gamma_total_exact;
    let trace = SurvivalSolver::new(&atom, &g, OMEGA_MAX).map_err(err)?.trace(10.0 / gamma, 400).map_err(err)?;
    let p0 = trace.survival[0];
    let max = trace.survival.iter().cloned().fold(f64::MIN, f64::max);
    let min = trace.survival.iter().cloned().fold(f64::MAX, f64::min);
    let bounded = (p0 - 1.0).abs() <= 1e-6 && max <= 1.0 + 1e-9 && min >= 0.0;

    let silent = AtomParams { dipole: 0.0, ..atom };
    let frozen = SurvivalSolver::new(&silent, &g, OMEGA_MAX).map_err(err)?.trace(10.0 / gamma, 100).map_err(err)?;
    let frozen_dev = frozen.survival.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);

    let heavy = AtomParams {
        rest_energy: 1e8 * atom.omega_a,
        ..atom
    };
    let fixed = fixed_atom_rate(&heavy, &g).map_err(err)?.gamma;
    let recoil = rate_at_rest_exact(&heavy, &g).map_err(err)?.gamma_total_exact;
    let heavy_dev = rel(recoil, fixed);
    Ok(Outcome::new(
        bounded && frozen_dev <= 1e-14 && heavy_dev <= 1e-6,
        format!(
            "P(0) - 1 = {:.1e}, P in [{min:.3e}, 1 + {:.1e}] over 10/G; d = 0 max |P - 1| = {frozen_dev:.1e}; Mc^2 = 1e8 w_A: |G_R/G_f - 1| = {heavy_dev:.1e}",
            p0 - 1.0,
            max - 1.0
        ),
    ))
}

fn coefficient_arbitration() -> Result<Outcome, String> {
    let g = guide();
    let mut out = Outcome::new(true, "");
    let mut details = Vec::new();
    for (label, rate, atom, printed) in [
        ("G_R (at rest)", RecoilRate::AtRest, canonical(), -0.75),
        (
            "G_M (p_z = 0.02 Mc)",
            RecoilRate::Moving,
            AtomParams {
                p_z: 0.02 * canonical().rest_energy,
                ..canonical()
            },
            0.5,
        ),
    ] {
        let c = recoil_coefficient(&atom, &g, rate, 0.02, 4).map_err(err)?;
        let uncertainty = c.error_estimate.abs() / c.coefficient.abs();
        out.passed &= uncertainty <= 0.05;
        details.push(format!("{label}: {:.4} w_A", c.coefficient));
        out = out.note(format!(
            "{label}: measured {:.6} w_A/Mc^2 (extraction uncertainty {:.1e}, within 5%: {}), printed {printed:+.2} w_A/Mc^2, derived -0.50 w_A/Mc^2",
            c.coefficient,
            uncertainty,
            uncertainty <= 0.05
        ));
    }
    out.detail = format!("measured first-order coefficients {} (informational)", details.join(", "));
    Ok(out)
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, Duration); 10] = [
        ("1 selection rule", selection_rule, Duration::from_secs(1)),
        ("2 stationary-rate oracle", stationary_oracle, Duration::from_secs(10)),
        ("3 recoil-root consistency", recoil_root, Duration::from_secs(1)),
        ("4 first-order frequency", first_order_frequency, Duration::from_secs(1)),
        ("5 cutoff divergence", cutoff_divergence, Duration::from_secs(5)),
        ("6 Doppler split", doppler_split, Duration::from_secs(5)),
        ("7 momentum independence", momentum_independence, Duration::from_secs(10)),
        ("8 Weisskopf-Wigner chain", weisskopf_wigner_chain, Duration::from_secs(60)),
        ("9 unitarity and limits", unitarity_and_limits, Duration::from_secs(30)),
        ("10 coefficient arbitration", coefficient_arbitration, Duration::from_secs(30)),
    ];
    let mut failures = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (passed, detail, notes) = match result {
            Ok(o) => (o.passed && elapsed <= budget, o.detail, o.notes),
            Err(e) => (false, format!("error: {e}"), Vec::new()),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.3} s, budget {} s]",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        for n in notes {
            println!("     info: {n}");
        }
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
