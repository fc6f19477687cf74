use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use super::{NumericsError, ToleranceSpec};

// 15-point Kronrod abscissae and weights with the embedded 7-point Gauss rule
// (QUADPACK qk15 tables).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Segment, NumericsError>
where
    F: FnMut(f64) -> Complex64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    check_finite(center, fc)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        check_finite(center - dx, f1)?;
        check_finite(center + dx, f2)?;
        let sum = f1 + f2;
        kronrod += sum * WGK[j];
        if j % 2 == 1 {
            gauss += sum * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Ok(Segment { a, b, value, error })
}

fn check_finite(x: f64, v: Complex64) -> Result<(), NumericsError> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(())
    } else {
        let value = if v.re.is_finite() { v.im } else { v.re };
        Err(NumericsError::NonFinite { x, value })
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of a complex-valued
/// integrand over `[a, b]`.
pub fn integrate_adaptive<F>(
    f: F,
    a: f64,
    b: f64,
    tol: &ToleranceSpec,
) -> Result<Integral, NumericsError>
where
    F: FnMut(f64) -> Complex64,
{
    integrate_adaptive_breaks(f, &[a, b], tol)
}

/// Real-valued convenience wrapper around [`integrate_adaptive`].
pub fn integrate_adaptive_real<F>(
    mut f: F,
    a: f64,
    b: f64,
    tol: &ToleranceSpec,
) -> Result<(f64, f64), NumericsError>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_adaptive(|x| Complex64::new(f(x), 0.0), a, b, tol)?;
    Ok((r.value.re, r.error))
}

/// Adaptive quadrature over consecutive intervals `breaks[i]..breaks[i+1]`.
///
/// The breakpoints seed the subdivision (singular points, sharp features);
/// the error budget is shared across all intervals.
pub fn integrate_adaptive_breaks<F>(
    mut f: F,
    breaks: &[f64],
    tol: &ToleranceSpec,
) -> Result<Integral, NumericsError>
where
    F: FnMut(f64) -> Complex64,
{
    if breaks.len() < 2 {
        return Err(NumericsError::InvalidInterval("need at least two breakpoints".into()));
    }
    if breaks.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::InvalidInterval("breakpoints must be finite".into()));
    }
    if breaks.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(NumericsError::InvalidInterval("breakpoints must be nondecreasing".into()));
    }

    let mut heap = BinaryHeap::new();
    // Segments that cannot be split further in floating point.
    let mut frozen_value = Complex64::new(0.0, 0.0);
    let mut frozen_error = 0.0_f64;
    let mut evals = 0;
    for w in breaks.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let seg = gk15(&mut f, w[0], w[1])?;
        evals += 15;
        heap.push(seg);
    }

    let exact_totals = |heap: &BinaryHeap<Segment>, fv: Complex64, fe: f64| {
        heap.iter()
            .fold((fv, fe), |(v, e), s| (v + s.value, e + s.error))
    };
    let (mut value, mut error) = exact_totals(&heap, frozen_value, frozen_error);
    loop {
        if error <= tol.target(value.norm()) {
            // Running totals drift; confirm with an exact resummation.
            let (v, e) = exact_totals(&heap, frozen_value, frozen_error);
            value = v;
            error = e;
            if error <= tol.target(value.norm()) {
                return Ok(Integral { value, error, evals });
            }
        }
        let Some(worst) = heap.pop() else {
            // Everything is frozen at floating-point resolution.
            return Err(NumericsError::QuadratureNotConverged {
                value_re: value.re,
                value_im: value.im,
                error,
                evals,
            });
        };
        let mid = 0.5 * (worst.a + worst.b);
        if evals + 30 > tol.max_evals {
            heap.push(worst);
            let (value, error) = exact_totals(&heap, frozen_value, frozen_error);
            return Err(NumericsError::QuadratureNotConverged {
                value_re: value.re,
                value_im: value.im,
                error,
                evals,
            });
        }
        if !(mid > worst.a && mid < worst.b) {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        let left = gk15(&mut f, worst.a, mid)?;
        let right = gk15(&mut f, mid, worst.b)?;
        evals += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}
