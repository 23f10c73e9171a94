//! Cycle statistics of a system-cost series.
//!
//! A cycle is counted each time the series drops through its own mean with a
//! step larger than three standard deviations of the one-step differences.
//! The period is `T / M`; the edgeworthiness `F` is the share of
//! non-negative steps, high for sawtooth-like gradual rises and sharp drops.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum MetricsError {
    #[error("series of length {got} is too short, need at least {need}")]
    TooShort { got: usize, need: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("burn-in fraction {0} outside [0, 1)")]
    BurnIn(f64),
}

/// Default width of the excluded outer bands in [`validity_diagnostic`].
pub const DEFAULT_VALIDITY_BAND: f64 = 0.25;

/// Knobs for [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleOptions {
    /// Leading fraction of the series dropped before measuring.
    pub burn_in: f64,
    /// See [`validity_diagnostic`].
    pub validity_band: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions {
            burn_in: 0.0,
            validity_band: DEFAULT_VALIDITY_BAND,
        }
    }
}

/// All cycle statistics of one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleReport {
    /// Length of the measured series.
    pub horizon: usize,
    /// Filtered downward mean crossings.
    pub crossings: usize,
    /// `M / T`.
    pub frequency: f64,
    /// `T / M`, absent when no crossing was found.
    pub period: Option<f64>,
    /// Share of non-negative one-step changes.
    pub edgeworthiness: f64,
    /// Population standard deviation of the one-step changes.
    pub sigma_delta: f64,
    /// Population standard deviation of the series.
    pub sigma_cost: f64,
    pub mean_cost: f64,
    /// True when the mean sits too close to an extreme to be a useful
    /// crossing reference.
    pub suspect: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation, computed on values shifted by the first
/// sample so that constant input gives exactly zero.
fn population_std(xs: &[f64]) -> f64 {
    let Some(&x0) = xs.first() else {
        return 0.0;
    };
    let mu = xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - x0 - mu).powi(2)).sum::<f64>() / xs.len() as f64;
    var.sqrt()
}

/// `C_{t+1} - C_t` for every consecutive pair.
pub fn delta_series(series: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if series.len() < 2 {
        return Err(MetricsError::TooShort {
            got: series.len(),
            need: 2,
        });
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Number of filtered downward crossings `M`. Zero for series shorter than 2.
pub fn count_cycles(series: &[f64]) -> usize {
    let Ok(delta) = delta_series(series) else {
        return 0;
    };
    let mu = mean(series);
    let threshold = 3.0 * population_std(&delta);
    series
        .windows(2)
        .zip(&delta)
        .filter(|(w, d)| w[0] > mu && w[1] < mu && d.abs() > threshold)
        .count()
}

/// Period `T / M`; `None` when `M = 0`.
pub fn period(series: &[f64]) -> Option<f64> {
    match count_cycles(series) {
        0 => None,
        m => Some(series.len() as f64 / m as f64),
    }
}

/// Fraction of one-step changes that are `>= 0`.
pub fn edgeworthiness(series: &[f64]) -> Result<f64, MetricsError> {
    let delta = delta_series(series)?;
    let ups = delta.iter().filter(|&&d| d >= 0.0).count();
    Ok(ups as f64 / delta.len() as f64)
}

/// Population standard deviation of the series (`sqrt(<C^2> - <C>^2)`,
/// evaluated in the two-pass form).
pub fn dispersion(series: &[f64]) -> Result<f64, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::TooShort { got: 0, need: 1 });
    }
    Ok(population_std(series))
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricsError::TooShort {
            got: x.len(),
            need: 2,
        });
    }
    // Centering on the first sample keeps constant inputs exactly constant.
    let (x0, y0) = (x[0], y[0]);
    let mx = x.iter().map(|a| a - x0).sum::<f64>() / x.len() as f64;
    let my = y.iter().map(|b| b - y0).sum::<f64>() / y.len() as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - x0 - mx, b - y0 - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Flags series whose mean lies outside `[min + band * range, max - band * range]`.
///
/// When the series spends most of its time near one extreme, the mean hugs
/// that extreme and mean crossings stop tracking the real oscillation.
/// Constant series are flagged.
pub fn validity_diagnostic(series: &[f64], band: f64) -> Result<bool, MetricsError> {
    if series.len() < 2 {
        return Err(MetricsError::TooShort {
            got: series.len(),
            need: 2,
        });
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        return Ok(true);
    }
    let mu = mean(series);
    Ok(mu < lo + band * range || mu > hi - band * range)
}

/// Full report for a series after dropping the burn-in prefix.
pub fn analyze(series: &[f64], opts: &CycleOptions) -> Result<CycleReport, MetricsError> {
    if !(0.0..1.0).contains(&opts.burn_in) {
        return Err(MetricsError::BurnIn(opts.burn_in));
    }
    let skip = (series.len() as f64 * opts.burn_in).floor() as usize;
    let series = &series[skip..];
    let delta = delta_series(series)?;

    let horizon = series.len();
    let crossings = count_cycles(series);
    let mean_cost = mean(series);
    Ok(CycleReport {
        horizon,
        crossings,
        frequency: crossings as f64 / horizon as f64,
        period: (crossings > 0).then(|| horizon as f64 / crossings as f64),
        edgeworthiness: edgeworthiness(series)?,
        sigma_delta: population_std(&delta),
        sigma_cost: population_std(series),
        mean_cost,
        suspect: validity_diagnostic(series, opts.validity_band)?,
    })
}
