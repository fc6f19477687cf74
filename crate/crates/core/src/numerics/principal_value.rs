use num_complex::Complex64;

use super::{integrate_adaptive_breaks, NumericsError, ToleranceSpec};

/// Cauchy principal value of `∫_a^b f(x) dx` for `f` with a simple pole
/// inside `(a, b)`.
///
/// The residue is estimated from symmetric samples around the pole and the
/// term `residue / (x - pole)` is subtracted analytically.
pub fn integrate_principal_value<F>(
    mut f: F,
    pole: f64,
    a: f64,
    b: f64,
    tol: &ToleranceSpec,
) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    check_interval(pole, a, b)?;
    let h0 = 0.05 * (pole - a).min(b - pole);

    // (x - p) f(x) = R + c (x - p) + ...; the odd combination isolates R
    // up to O(h^2), the even one must vanish like O(h) for a simple pole.
    let mut odd = |h: f64| 0.5 * h * (f(pole + h) - f(pole - h));
    let residue_at = |odd: &mut dyn FnMut(f64) -> f64, h: f64| (4.0 * odd(0.5 * h) - odd(h)) / 3.0;
    let r1 = residue_at(&mut odd, h0);
    let r2 = residue_at(&mut odd, 0.25 * h0);
    let even = |f: &mut F, h: f64| 0.5 * h * (f(pole + h) + f(pole - h));
    let e1 = even(&mut f, h0).abs();
    let e2 = even(&mut f, 0.0625 * h0).abs();
    let scale = r1.abs().max(r2.abs()).max(f64::MIN_POSITIVE);
    if (r1 - r2).abs() > 1e-6 * scale.max(e1) || e2 > e1.max(1e-300) * 0.5 + 1e-15 * scale {
        return Err(NumericsError::PoleNotSimple {
            pole,
            first: r1,
            second: r2,
        });
    }
    integrate_principal_value_with_residue(f, pole, r2, a, b, tol)
}

/// Principal value with an analytically known residue.
pub fn integrate_principal_value_with_residue<F>(
    mut f: F,
    pole: f64,
    residue: f64,
    a: f64,
    b: f64,
    tol: &ToleranceSpec,
) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    check_interval(pole, a, b)?;
    let mut remainder = |x: f64| f(x) - residue / (x - pole);
    // Fold the symmetric part around the pole so that any error in the
    // residue cancels pairwise instead of leaving a 1/(x - pole) term.
    let w = (pole - a).min(b - pole);
    let folded = integrate_adaptive_breaks(
        |u| Complex64::new(remainder(pole + u) + remainder(pole - u), 0.0),
        &[0.0, w],
        tol,
    )?;
    let mut total = folded.value.re;
    if b - pole > w {
        total += integrate_adaptive_breaks(
            |x| Complex64::new(remainder(x), 0.0),
            &[pole + w, b],
            tol,
        )?
        .value
        .re;
    } else if pole - a > w {
        total += integrate_adaptive_breaks(
            |x| Complex64::new(remainder(x), 0.0),
            &[a, pole - w],
            tol,
        )?
        .value
        .re;
    }
    Ok(total + residue * ((b - pole) / (pole - a)).ln())
}

fn check_interval(pole: f64, a: f64, b: f64) -> Result<(), NumericsError> {
    if a < pole && pole < b {
        Ok(())
    } else {
        Err(NumericsError::InvalidInterval(format!(
            "pole {pole} must lie strictly inside ({a}, {b})"
        )))
    }
}
