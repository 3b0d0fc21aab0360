//! Exponential smoothing of the bar channels and up/down direction labels.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{Bar, BarSeries};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("smoothing factor must lie in (0, 1], got {0}")]
    Alpha(f64),
    #[error("cannot smooth an empty sequence")]
    Empty,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("label horizon must be >= 1")]
    Horizon,
    #[error("series of {len} bars is too short for horizon {horizon}")]
    TooShort { len: usize, horizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    alpha: f64,
}

impl SmoothingParams {
    pub const DEFAULT_ALPHA: f64 = 0.2;

    pub fn new(alpha: f64) -> Result<Self, PreprocessError> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Self { alpha })
        } else {
            Err(PreprocessError::Alpha(alpha))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            alpha: Self::DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    horizon: usize,
}

impl LabelSpec {
    pub const DEFAULT_HORIZON: usize = 60;

    pub fn new(horizon: usize) -> Result<Self, PreprocessError> {
        if horizon >= 1 {
            Ok(Self { horizon })
        } else {
            Err(PreprocessError::Horizon)
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

impl Default for LabelSpec {
    fn default() -> Self {
        Self {
            horizon: Self::DEFAULT_HORIZON,
        }
    }
}

/// `out[0] = x[0]`, `out[t] = alpha * x[t] + (1 - alpha) * out[t - 1]`.
pub fn exponential_smooth(values: &[f64], params: SmoothingParams) -> Result<Vec<f64>, PreprocessError> {
    if values.is_empty() {
        return Err(PreprocessError::Empty);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(PreprocessError::NonFinite(i));
    }
    let a = params.alpha;
    let mut out = Vec::with_capacity(values.len());
    let mut prev = values[0];
    out.push(prev);
    for &x in &values[1..] {
        prev = a * x + (1.0 - a) * prev;
        out.push(prev);
    }
    Ok(out)
}

/// Smooths open, high, low, close and volume independently.
///
/// Smoothing is a positive linear combination, so the bar ordering
/// constraints (`low <= open, close <= high`) survive it.
pub fn smooth_series(series: &BarSeries, params: SmoothingParams) -> Result<BarSeries, PreprocessError> {
    let open = exponential_smooth(&series.opens(), params)?;
    let high = exponential_smooth(&series.highs(), params)?;
    let low = exponential_smooth(&series.lows(), params)?;
    let close = exponential_smooth(&series.closes(), params)?;
    let volume = exponential_smooth(&series.volumes(), params)?;
    let bars = series
        .bars()
        .iter()
        .enumerate()
        .map(|(t, b)| {
            // Rounding can push a smoothed open/close a hair past the smoothed extremes.
            let (o, c) = (open[t], close[t]);
            Bar {
                date: b.date,
                open: o,
                high: high[t].max(o).max(c),
                low: low[t].min(o).min(c),
                close: c,
                volume: volume[t],
            }
        })
        .collect();
    Ok(BarSeries::new(series.symbol(), bars).expect("smoothing preserves bar invariants"))
}

/// Direction labels aligned to the first `len - horizon` dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub horizon: usize,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<u8>,
}

impl Labels {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `label[t] = 1` iff the raw close `horizon` days later is strictly higher.
pub fn make_labels(series: &BarSeries, spec: LabelSpec) -> Result<Labels, PreprocessError> {
    let h = spec.horizon;
    if series.len() <= h {
        return Err(PreprocessError::TooShort {
            len: series.len(),
            horizon: h,
        });
    }
    let bars = series.bars();
    let n = bars.len() - h;
    Ok(Labels {
        horizon: h,
        dates: bars[..n].iter().map(|b| b.date).collect(),
        values: (0..n)
            .map(|t| u8::from(bars[t + h].close > bars[t].close))
            .collect(),
    })
}
