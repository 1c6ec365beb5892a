//! Forecast error statistics.
//!
//! Percentage errors use `(p - o) / o` and skip pairs with `|o| <= 1e-9`;
//! the number of skipped pairs is reported alongside.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::quarter_ranges;

/// Observations at or below this magnitude are left out of MAPE and MPE.
pub const PCT_ZERO_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {pred} predictions, {obs} observations, {mask} mask flags")]
    LengthMismatch { pred: usize, obs: usize, mask: usize },
    #[error("no comparable pairs")]
    Empty,
    #[error("values per day must be positive")]
    BadDayLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mae: f64,
    pub rmse: f64,
    pub mbe: f64,
    /// `None` when every observation is (near) zero.
    pub mape_pct: Option<f64>,
    pub mpe_pct: Option<f64>,
    pub n: usize,
    /// Pairs left out of the percentage errors.
    pub n_pct_excluded: usize,
}

impl ErrorStats {
    pub fn zero(n: usize) -> Self {
        Self {
            mae: 0.0,
            rmse: 0.0,
            mbe: 0.0,
            mape_pct: Some(0.0),
            mpe_pct: Some(0.0),
            n,
            n_pct_excluded: 0,
        }
    }
}

/// Error statistics over the pairs where `mask` is true.
pub fn compute_stats(pred: &[f64], obs: &[f64], mask: &[bool]) -> Result<ErrorStats, MetricsError> {
    if pred.len() != obs.len() || pred.len() != mask.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            obs: obs.len(),
            mask: mask.len(),
        });
    }
    let mut n = 0usize;
    let (mut abs, mut sq, mut bias) = (0.0, 0.0, 0.0);
    let (mut n_pct, mut ape, mut pe) = (0usize, 0.0, 0.0);
    for ((&p, &o), _) in pred.iter().zip(obs).zip(mask).filter(|(_, &m)| m) {
        let e = p - o;
        n += 1;
        abs += e.abs();
        sq += e * e;
        bias += e;
        if o.abs() > PCT_ZERO_THRESHOLD {
            n_pct += 1;
            ape += e.abs() / o.abs();
            pe += e / o;
        }
    }
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let nf = n as f64;
    let pct = |s: f64| (n_pct > 0).then(|| 100.0 * s / n_pct as f64);
    Ok(ErrorStats {
        mae: abs / nf,
        rmse: (sq / nf).sqrt(),
        mbe: bias / nf,
        mape_pct: pct(ape),
        mpe_pct: pct(pe),
        n,
        n_pct_excluded: n - n_pct,
    })
}

/// Whole-series statistics plus one entry per day-index quarter; a quarter
/// with no comparable pairs is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterStats {
    pub complete: ErrorStats,
    pub quarters: [Option<ErrorStats>; 4],
}

/// Splits aligned series of `values_per_day` samples per day into quarters
/// of the day index.
pub fn quarter_stats(
    pred: &[f64],
    obs: &[f64],
    mask: &[bool],
    values_per_day: usize,
) -> Result<QuarterStats, MetricsError> {
    if values_per_day == 0 {
        return Err(MetricsError::BadDayLength);
    }
    let complete = compute_stats(pred, obs, mask)?;
    let n_days = pred.len().div_ceil(values_per_day);
    let quarters = quarter_ranges(n_days).map(|days| {
        let r = (days.start * values_per_day).min(pred.len())..(days.end * values_per_day).min(pred.len());
        compute_stats(&pred[r.clone()], &obs[r.clone()], &mask[r]).ok()
    });
    Ok(QuarterStats { complete, quarters })
}
