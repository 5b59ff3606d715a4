//! Power-law fits in log-log coordinates.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `log value` against `log t`.
pub fn fit_rate(series: &[(f64, f64)]) -> Result<RateFit> {
    fit_with_min(series, 5)
}

/// [`fit_rate`] for short sweeps with at least `min_points` points.
pub(crate) fn fit_with_min(series: &[(f64, f64)], min_points: usize) -> Result<RateFit> {
    if series.len() < min_points.max(2) {
        return invalid(format!("fit_rate needs at least {min_points} points, got {}", series.len()));
    }
    if let Some(&(t, v)) = series.iter().find(|(t, v)| !(*t > 0.0 && *v > 0.0 && t.is_finite() && v.is_finite())) {
        return invalid(format!("fit_rate needs positive finite data, got ({t}, {v})"));
    }
    let n = series.len() as f64;
    let pts: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("fit_rate needs at least two distinct abscissae");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { slope, intercept, r_squared })
}

/// `log2(coarse / fine)`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Log-spaced sample points `a .. b` inclusive.
pub fn log_space(a: f64, b: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let (la, lb) = (a.ln(), b.ln());
    (0..count).map(|k| (la + (lb - la) * k as f64 / (count - 1) as f64).exp()).collect()
}
