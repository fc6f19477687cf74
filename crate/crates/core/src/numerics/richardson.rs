use serde::Serialize;

use super::NumericsError;

/// First-order coefficient of a smooth function at the origin.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OrderCoefficient {
    pub coefficient: f64,
    /// Difference between the last two diagonal Richardson entries.
    pub error_estimate: f64,
    /// False when the diagonal corrections did not shrink monotonically.
    pub monotone: bool,
    /// Diagonal of the Richardson table, coarsest first.
    pub diagonal: Vec<f64>,
}

/// Richardson-extrapolated `g'(0)` from forward differences with steps
/// `eps0, eps0/2, ..., eps0/2^levels`.
///
/// `g` is only sampled at `0` and at positive steps, so it may be undefined
/// for negative arguments (an inverse mass, say).
pub fn extract_order_coefficient<G>(
    mut g: G,
    eps0: f64,
    levels: usize,
) -> Result<OrderCoefficient, NumericsError>
where
    G: FnMut(f64) -> f64,
{
    if levels < 2 {
        return Err(NumericsError::InvalidInterval(format!("levels must be >= 2, got {levels}")));
    }
    if !(eps0 > 0.0) || !eps0.is_finite() {
        return Err(NumericsError::InvalidInterval(format!("eps0 must be positive, got {eps0}")));
    }
    let g0 = g(0.0);
    if !g0.is_finite() {
        return Err(NumericsError::NonFinite { x: 0.0, value: g0 });
    }

    let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels + 1);
    for i in 0..=levels {
        let h = eps0 / 2f64.powi(i as i32);
        let gh = g(h);
        if !gh.is_finite() {
            return Err(NumericsError::NonFinite { x: h, value: gh });
        }
        let mut row = Vec::with_capacity(i + 1);
        row.push((gh - g0) / h);
        for j in 1..=i {
            let factor = 2f64.powi(j as i32) - 1.0;
            let prev = row[j - 1];
            row.push(prev + (prev - table[i - 1][j - 1]) / factor);
        }
        table.push(row);
    }

    let diagonal: Vec<f64> = table.iter().enumerate().map(|(i, r)| r[i]).collect();
    let corrections: Vec<f64> = diagonal.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let monotone = corrections.windows(2).all(|w| w[1] <= w[0] || w[1] < 1e-14 * diagonal[0].abs().max(1e-300));
    let coefficient = *diagonal.last().expect("levels >= 2");
    let error_estimate = *corrections.last().expect("levels >= 2");
    Ok(OrderCoefficient {
        coefficient,
        error_estimate,
        monotone,
        diagonal,
    })
}
