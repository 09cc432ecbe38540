//! Line fits, growth slopes and convergence orders.

use serde::Serialize;

/// Multiplier on `ε·h^{-m}` in [`roundoff_floor`].
pub const ROUNDOFF_FACTOR: f64 = 100.0;

/// Floor for quantities built from positions alone, such as sup-norm
/// differences between two discretely equivalent solves. It absorbs the
/// accumulation of `ε`-sized rounding over `O(h⁻²)` time steps.
pub const POSITION_ROUNDOFF_FLOOR: f64 = 1e-12;

/// Least-squares line `y ≈ a + b·x`. Returns `(a, b)`, or `None` with
/// fewer than two points or a degenerate abscissa.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Slope of the least-squares line over the second half of a time series,
/// which drops start-up transients.
pub fn second_half_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let n = t.len().min(y.len());
    let start = n / 2;
    linear_fit(&t[start..n], &y[start..n]).map(|(_, b)| b)
}

/// Affine envelope `a + b·t` lying on or above every sample: the
/// least-squares slope with the intercept raised to the worst residual.
pub fn affine_envelope(t: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let (_, b) = linear_fit(t, y)?;
    let a = t
        .iter()
        .zip(y)
        .map(|(t, y)| y - b * t)
        .fold(f64::NEG_INFINITY, f64::max);
    Some((a, b))
}

/// Rounding floor for a quantity built from derivatives of order up to
/// `m`: finite differences amplify `ε` by `h^{-m}`.
pub fn roundoff_floor(m: u32, spacing: f64) -> f64 {
    if m == 0 {
        POSITION_ROUNDOFF_FLOOR
    } else {
        ROUNDOFF_FACTOR * f64::EPSILON / spacing.powi(m as i32)
    }
}

/// An error or drift measured across a resolution ladder.
///
/// The check passes when the least-squares order in `log h` reaches the
/// threshold, or when the finest value already sits at the rounding floor
/// (a quantity that is zero up to rounding has no meaningful order).
#[derive(Debug, Clone, Serialize)]
pub struct Convergence {
    pub quantity: String,
    pub nodes: Vec<usize>,
    pub spacings: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_order: f64,
    pub pairwise_orders: Vec<f64>,
    /// Rounding floor at the finest spacing.
    pub floor: f64,
}

impl Convergence {
    pub fn new(
        quantity: impl Into<String>,
        nodes: Vec<usize>,
        spacings: Vec<f64>,
        values: Vec<f64>,
        derivative_order: u32,
    ) -> Self {
        let lx: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
        let fitted_order = if ly.iter().all(|v| v.is_finite()) {
            linear_fit(&lx, &ly).map_or(f64::NAN, |(_, b)| b)
        } else {
            f64::NAN
        };
        let pairwise_orders = lx
            .windows(2)
            .zip(ly.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        let finest = spacings.iter().cloned().fold(f64::INFINITY, f64::min);
        Self {
            quantity: quantity.into(),
            nodes,
            spacings,
            values,
            fitted_order,
            pairwise_orders,
            floor: roundoff_floor(derivative_order, finest),
        }
    }

    /// Value at the finest spacing.
    pub fn finest(&self) -> f64 {
        self.spacings
            .iter()
            .zip(&self.values)
            .min_by(|a, b| a.0.total_cmp(b.0))
            .map_or(f64::NAN, |(_, v)| v.abs())
    }

    pub fn min_pairwise(&self) -> f64 {
        self.pairwise_orders.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn at_floor(&self) -> bool {
        self.finest() <= self.floor
    }

    pub fn meets(&self, threshold: f64) -> bool {
        self.fitted_order >= threshold || self.at_floor()
    }
}
