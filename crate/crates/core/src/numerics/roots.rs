use super::{NumericsError, ToleranceSpec};

/// Bisection on a sign-changing bracket.
///
/// Stops once the bracket width is below `tol.target(x)` or when the
/// bracket cannot be split any further in floating point.
pub fn find_root_bracketed<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: &ToleranceSpec,
) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) {
        return Err(NumericsError::InvalidInterval(format!("lo = {lo} >= hi = {hi}")));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    let mut evals = 2;
    if f_lo.is_nan() {
        return Err(NumericsError::NonFinite { x: lo, value: f_lo });
    }
    if f_hi.is_nan() {
        return Err(NumericsError::NonFinite { x: hi, value: f_hi });
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(NumericsError::NoSignChange { lo, hi, f_lo, f_hi });
    }

    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol.target(mid) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if evals >= tol.max_evals {
            return Err(NumericsError::RootNotConverged { lo, hi, evals });
        }
        let f_mid = f(mid);
        evals += 1;
        if f_mid.is_nan() {
            return Err(NumericsError::NonFinite { x: mid, value: f_mid });
        }
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}
