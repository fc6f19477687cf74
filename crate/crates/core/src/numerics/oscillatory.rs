//! Fourier integrals `∫ e^{-ixt} f(x) dx` of a smooth, non-oscillatory `f`
//! for many values of `t`.
//!
//! `f` is expanded panel by panel in Legendre polynomials; the weight
//! `e^{-ixt}` is then integrated exactly against each polynomial through
//! spherical Bessel functions, so panel sizes only have to resolve `f`.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::NumericsError;

const ORDER: usize = 16;

struct Rule {
    nodes: [f64; ORDER],
    /// `proj[l][i] = (2l+1)/2 * w_i * P_l(x_i)`
    proj: [[f64; ORDER]; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        let n = ORDER;
        for i in 0..n {
            // Chebyshev initial guess, Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        let mut proj = [[0.0; ORDER]; ORDER];
        for (i, &x) in nodes.iter().enumerate() {
            let p = legendre_values(x);
            for l in 0..ORDER {
                proj[l][i] = 0.5 * (2 * l + 1) as f64 * weights[i] * p[l];
            }
        }
        Rule { nodes, proj }
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn legendre_values(x: f64) -> [f64; ORDER] {
    let mut p = [0.0; ORDER];
    p[0] = 1.0;
    p[1] = x;
    for k in 2..ORDER {
        p[k] = ((2 * k - 1) as f64 * x * p[k - 1] - (k - 1) as f64 * p[k - 2]) / k as f64;
    }
    p
}

/// Spherical Bessel functions `j_0(z) .. j_{ORDER-1}(z)`.
pub fn spherical_bessel_j(z: f64) -> [f64; ORDER] {
    let mut out = [0.0; ORDER];
    let az = z.abs();
    if az < 1.0 {
        // Power series; converges fast for |z| < 1.
        let q = -0.5 * az * az;
        let mut lead = 1.0; // z^l / (2l+1)!!
        for (l, slot) in out.iter_mut().enumerate() {
            if l > 0 {
                lead *= az / (2 * l + 1) as f64;
            }
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..40 {
                term *= q / (k as f64 * (2 * l + 2 * k + 1) as f64);
                sum += term;
                if term.abs() < 1e-17 * sum.abs() {
                    break;
                }
            }
            *slot = lead * sum;
        }
    } else if az >= ORDER as f64 {
        out[0] = az.sin() / az;
        out[1] = az.sin() / (az * az) - az.cos() / az;
        for l in 1..ORDER - 1 {
            out[l + 1] = (2 * l + 1) as f64 / az * out[l] - out[l - 1];
        }
    } else {
        // Miller's backward recurrence, normalised on the larger of j_0, j_1.
        let start = ORDER + 20 + az as usize;
        let (mut next, mut cur) = (0.0_f64, 1e-200_f64);
        let mut raw = [0.0; ORDER];
        for l in (1..=start).rev() {
            let prev = (2 * l + 1) as f64 / az * cur - next;
            next = cur;
            cur = prev;
            if cur.abs() > 1e200 {
                cur *= 1e-200;
                next *= 1e-200;
                for v in raw.iter_mut() {
                    *v *= 1e-200;
                }
            }
            if l - 1 < ORDER {
                raw[l - 1] = cur;
            }
        }
        let j0 = az.sin() / az;
        let j1 = az.sin() / (az * az) - az.cos() / az;
        let scale = if j0.abs() >= j1.abs() { j0 / raw[0] } else { j1 / raw[1] };
        for l in 0..ORDER {
            out[l] = raw[l] * scale;
        }
    }
    if z < 0.0 {
        for (l, v) in out.iter_mut().enumerate() {
            if l % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct PanelOptions {
    /// Accepted absolute error per panel.
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Panels narrower than this are accepted unconditionally.
    pub min_width: f64,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_panels: 20_000,
            min_width: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
struct Panel {
    center: f64,
    half: f64,
    coeffs: [Complex64; ORDER],
}

/// Piecewise Legendre representation of a function on a finite range.
#[derive(Debug, Clone)]
pub struct OscillatoryPanels {
    panels: Vec<Panel>,
    /// Panels accepted at the width floor without meeting `abs_tol`.
    pub unresolved: usize,
    /// Sum of per-panel truncation estimates.
    pub error_estimate: f64,
}

impl OscillatoryPanels {
    /// Adaptively expands `f` over consecutive intervals of `breaks`.
    pub fn build<F, E>(mut f: F, breaks: &[f64], opts: &PanelOptions) -> Result<Self, E>
    where
        F: FnMut(f64) -> Result<Complex64, E>,
        E: From<NumericsError>,
    {
        if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(NumericsError::InvalidInterval(
                "panel breakpoints must be strictly increasing".into(),
            )
            .into());
        }
        let r = rule();
        let mut panels = Vec::new();
        let mut unresolved = 0;
        let mut error_estimate = 0.0;
        for w in breaks.windows(2) {
            // Depth-first with the left half processed first keeps the
            // panel list sorted.
            let mut stack = vec![(w[0], w[1])];
            while let Some((a, b)) = stack.pop() {
                if panels.len() + stack.len() >= opts.max_panels {
                    return Err(NumericsError::PanelLimit(format!(
                        "more than {} panels needed",
                        opts.max_panels
                    ))
                    .into());
                }
                let center = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                let mut values = [Complex64::new(0.0, 0.0); ORDER];
                for (v, &x) in values.iter_mut().zip(r.nodes.iter()) {
                    *v = f(center + half * x)?;
                    if !(v.re.is_finite() && v.im.is_finite()) {
                        return Err(NumericsError::NonFinite {
                            x: center + half * x,
                            value: v.re,
                        }
                        .into());
                    }
                }
                let mut coeffs = [Complex64::new(0.0, 0.0); ORDER];
                for (l, c) in coeffs.iter_mut().enumerate() {
                    *c = values
                        .iter()
                        .zip(r.proj[l].iter())
                        .map(|(v, p)| v * p)
                        .sum();
                }
                let tail = 2.0 * half * (coeffs[ORDER - 1].norm() + coeffs[ORDER - 2].norm());
                let mid_ok = center > a && center < b;
                if tail <= opts.abs_tol || 2.0 * half <= opts.min_width || !mid_ok {
                    if tail > opts.abs_tol {
                        unresolved += 1;
                    }
                    error_estimate += tail;
                    panels.push(Panel { center, half, coeffs });
                } else {
                    stack.push((center, b));
                    stack.push((a, center));
                }
            }
        }
        Ok(Self {
            panels,
            unresolved,
            error_estimate,
        })
    }

    /// Joins expansions over adjacent ranges, given in ascending order.
    pub fn concat(parts: impl IntoIterator<Item = Self>) -> Self {
        let mut out = Self {
            panels: Vec::new(),
            unresolved: 0,
            error_estimate: 0.0,
        };
        for part in parts {
            out.panels.extend(part.panels);
            out.unresolved += part.unresolved;
            out.error_estimate += part.error_estimate;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    /// `∫ f(x) dx` over the covered range.
    pub fn integral(&self) -> Complex64 {
        self.panels.iter().map(|p| p.coeffs[0] * (2.0 * p.half)).sum()
    }

    /// `∫ e^{-ixt} f(x) dx` over the covered range.
    pub fn fourier(&self, t: f64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for p in &self.panels {
            let j = spherical_bessel_j(p.half * t);
            let mut sum = Complex64::new(0.0, 0.0);
            // (-i)^l cycles through 1, -i, -1, i.
            let mut phase = Complex64::new(1.0, 0.0);
            for l in 0..ORDER {
                sum += p.coeffs[l] * phase * j[l];
                phase *= Complex64::new(0.0, -1.0);
            }
            let shift = Complex64::from_polar(1.0, -p.center * t);
            total += shift * sum * (2.0 * p.half);
        }
        total
    }
}
