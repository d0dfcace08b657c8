//! Central finite differences and log-log slope fitting.

use crate::linalg::{c, Matrix, Vector, C64};

/// Values a difference quotient can be formed from.
pub trait Differenceable: Sized {
    /// `(self - other) / denom`
    fn quotient(&self, other: &Self, denom: f64) -> Self;
}

impl Differenceable for f64 {
    fn quotient(&self, other: &Self, denom: f64) -> Self {
        (self - other) / denom
    }
}

impl Differenceable for C64 {
    fn quotient(&self, other: &Self, denom: f64) -> Self {
        (self - other) / denom
    }
}

impl Differenceable for Vector {
    fn quotient(&self, other: &Self, denom: f64) -> Self {
        self.axpy(c(-1.0), other).scale(c(1.0 / denom))
    }
}

impl Differenceable for Matrix {
    fn quotient(&self, other: &Self, denom: f64) -> Self {
        self.axpy(c(-1.0), other).scale(c(1.0 / denom))
    }
}

/// `(f(t + h) - f(t - h)) / (2h)`; evaluation errors propagate.
pub fn central_diff<T, E, F>(f: F, t: f64, h: f64) -> Result<T, E>
where
    T: Differenceable,
    F: Fn(f64) -> Result<T, E>,
{
    let plus = f(t + h)?;
    let minus = f(t - h)?;
    Ok(plus.quotient(&minus, 2.0 * h))
}

/// Least-squares slope of `log y` against `log x`. Non-positive samples are skipped;
/// returns `None` with fewer than two usable points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}
