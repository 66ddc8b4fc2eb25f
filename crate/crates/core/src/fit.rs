//! Order statistics and log-log power-law fits.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SgqtError};

/// Percentile of already-sorted data, linearly interpolated between order
/// statistics (position `q·(n−1)`).
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    assert!((0.0..=1.0).contains(&q), "percentile fraction out of range");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// `(q25, median, q75)`; NaNs are not expected and sort last.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (
        percentile_sorted(&sorted, 0.25),
        percentile_sorted(&sorted, 0.5),
        percentile_sorted(&sorted, 0.75),
    )
}

/// How the fitted slope is reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeConvention {
    /// `y ∝ x^(−γ)`; exponent is `−slope`.
    Decay,
    /// `y ∝ x^η`; exponent is `+slope`.
    Growth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    /// `log10` of the prefactor.
    pub intercept: f64,
    /// Standard error of the exponent.
    pub stderr: f64,
    /// Inclusive `x` range the fit was restricted to.
    pub window: (f64, f64),
    pub points: usize,
    pub convention: SlopeConvention,
}

/// Ordinary least squares of `log10 y` on `log10 x` over points with
/// `window.0 ≤ x ≤ window.1`.
pub fn fit_power_law(
    xs: &[f64],
    ys: &[f64],
    window: (f64, f64),
    convention: SlopeConvention,
) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(SgqtError::Dimension(format!(
            "{} x values but {} y values",
            xs.len(),
            ys.len()
        )));
    }
    let mut pts = Vec::new();
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x >= window.0 && x <= window.1) {
            continue;
        }
        if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(SgqtError::Domain(format!(
                "power-law fit needs positive finite data, got ({x}, {y})"
            )));
        }
        pts.push((x.log10(), y.log10()));
    }
    if pts.len() < 3 {
        return Err(SgqtError::Fit(format!(
            "window [{}, {}] holds {} points, need at least 3",
            window.0,
            window.1,
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SgqtError::Fit("all x values in the window coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    let exponent = match convention {
        SlopeConvention::Decay => -slope,
        SlopeConvention::Growth => slope,
    };
    Ok(ScalingFit {
        exponent,
        intercept,
        stderr,
        window,
        points: pts.len(),
        convention,
    })
}
