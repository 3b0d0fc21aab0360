//! The fifteen technical indicator columns.
//!
//! Each indicator is reduced to one scale-free scalar per day so that the
//! columns can be fed to a tree model directly. Exact definitions (index
//! `t`, `c`/`h`/`l`/`v` the close/high/low/volume channels):
//!
//! | column            | value at `t`                                                    | warm-up        |
//! |-------------------|-----------------------------------------------------------------|----------------|
//! | `ma_rel`          | `(c - SMA_p(c)) / SMA_p(c)`                                     | `p - 1`        |
//! | `macd_hist`       | `(MACD - EMA_signal(MACD)) / c`, `MACD = EMA_fast - EMA_slow`   | `slow+signal-2`|
//! | `rsi`             | Wilder RSI, first averages are simple means                     | `p`            |
//! | `stoch_d`         | `SMA_d(%K_k)`, `%K = 100 (c - LL) / (HH - LL)`                  | `k + d - 2`    |
//! | `williams_r`      | `-100 (HH - c) / (HH - LL)`                                     | `p - 1`        |
//! | `bollinger_pct_b` | `(c - (SMA - w sd)) / (2 w sd)`, population sd                  | `p - 1`        |
//! | `obv_flow`        | `(OBV_t - OBV_{t-p}) / sum(v, p)`                               | `p`            |
//! | `adl_flow`        | `(ADL_t - ADL_{t-p}) / sum(v, p)`                               | `p`            |
//! | `aroon_osc`       | `AroonUp - AroonDown` over `p + 1` bars                         | `p`            |
//! | `atr_rel`         | Wilder ATR / c                                                  | `p`            |
//! | `ichimoku_cloud`  | `(c - (SpanA + SpanB) / 2) / c`, spans displaced                | `span + disp`  |
//! | `psar_rel`        | `(c - SAR) / c`                                                 | `1`            |
//! | `fib_pos`         | `(HH - c) / (HH - LL)`                                          | `p - 1`        |
//! | `cmf`             | `sum(CLV v, p) / sum(v, p)`                                     | `p - 1`        |
//! | `adx`             | Wilder-smoothed DX                                              | `2p - 1`       |
//!
//! Degenerate windows map to fixed values: `%K = 50`, `%R = -50`, `%B = 0.5`,
//! Fibonacci position `0.5`, zero-volume flows `0`, RSI `100` when the
//! average loss is zero and `0` when the average gain is zero.
//!
//! Ichimoku spans at `t` are computed at `s = t - disp` from the windows of
//! bars that closed before `s` (`[s - period, s)`), so a 52-bar span
//! displaced 26 days first appears at index 78.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::BarSeries;

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("{name}: {len} bars is too short for a warm-up of {warm_up}")]
    TooShort {
        name: &'static str,
        len: usize,
        warm_up: usize,
    },
    #[error("{name}: invalid parameters ({reason})")]
    Params { name: &'static str, reason: String },
    #[error("{name}: non-finite value at index {index}")]
    NonFinite { name: &'static str, index: usize },
    #[error("indicator spec list is empty")]
    NoSpecs,
    #[error("duplicate indicator column `{0}`")]
    Duplicate(String),
    #[error("unknown indicator `{0}`")]
    UnknownKind(String),
    #[error("indicator `{kind}` has no parameter `{param}`")]
    UnknownParam { kind: String, param: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    MaRel,
    MacdHist,
    Rsi,
    StochD,
    WilliamsR,
    BollingerPctB,
    ObvFlow,
    AdlFlow,
    AroonOsc,
    AtrRel,
    IchimokuCloud,
    PsarRel,
    FibPos,
    Cmf,
    Adx,
}

impl IndicatorKind {
    /// Fixed column order.
    pub const ALL: [IndicatorKind; 15] = [
        Self::MaRel,
        Self::MacdHist,
        Self::Rsi,
        Self::StochD,
        Self::WilliamsR,
        Self::BollingerPctB,
        Self::ObvFlow,
        Self::AdlFlow,
        Self::AroonOsc,
        Self::AtrRel,
        Self::IchimokuCloud,
        Self::PsarRel,
        Self::FibPos,
        Self::Cmf,
        Self::Adx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MaRel => "ma_rel",
            Self::MacdHist => "macd_hist",
            Self::Rsi => "rsi",
            Self::StochD => "stoch_d",
            Self::WilliamsR => "williams_r",
            Self::BollingerPctB => "bollinger_pct_b",
            Self::ObvFlow => "obv_flow",
            Self::AdlFlow => "adl_flow",
            Self::AroonOsc => "aroon_osc",
            Self::AtrRel => "atr_rel",
            Self::IchimokuCloud => "ichimoku_cloud",
            Self::PsarRel => "psar_rel",
            Self::FibPos => "fib_pos",
            Self::Cmf => "cmf",
            Self::Adx => "adx",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, IndicatorError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| IndicatorError::UnknownKind(name.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndicatorSpec {
    MaRel { period: usize },
    MacdHist { fast: usize, slow: usize, signal: usize },
    Rsi { period: usize },
    StochD { k_period: usize, d_period: usize },
    WilliamsR { period: usize },
    BollingerPctB { period: usize, width: f64 },
    ObvFlow { period: usize },
    AdlFlow { period: usize },
    AroonOsc { period: usize },
    AtrRel { period: usize },
    IchimokuCloud {
        conversion: usize,
        base: usize,
        span: usize,
        displacement: usize,
    },
    PsarRel { start: f64, step: f64, max: f64 },
    FibPos { period: usize },
    Cmf { period: usize },
    Adx { period: usize },
}

impl IndicatorSpec {
    pub fn default_for(kind: IndicatorKind) -> Self {
        match kind {
            IndicatorKind::MaRel => Self::MaRel { period: 10 },
            IndicatorKind::MacdHist => Self::MacdHist {
                fast: 12,
                slow: 26,
                signal: 9,
            },
            IndicatorKind::Rsi => Self::Rsi { period: 14 },
            IndicatorKind::StochD => Self::StochD {
                k_period: 14,
                d_period: 3,
            },
            IndicatorKind::WilliamsR => Self::WilliamsR { period: 14 },
            IndicatorKind::BollingerPctB => Self::BollingerPctB {
                period: 20,
                width: 2.0,
            },
            IndicatorKind::ObvFlow => Self::ObvFlow { period: 10 },
            IndicatorKind::AdlFlow => Self::AdlFlow { period: 10 },
            IndicatorKind::AroonOsc => Self::AroonOsc { period: 25 },
            IndicatorKind::AtrRel => Self::AtrRel { period: 14 },
            IndicatorKind::IchimokuCloud => Self::IchimokuCloud {
                conversion: 9,
                base: 26,
                span: 52,
                displacement: 26,
            },
            IndicatorKind::PsarRel => Self::PsarRel {
                start: 0.02,
                step: 0.02,
                max: 0.2,
            },
            IndicatorKind::FibPos => Self::FibPos { period: 60 },
            IndicatorKind::Cmf => Self::Cmf { period: 20 },
            IndicatorKind::Adx => Self::Adx { period: 14 },
        }
    }

    /// The default fifteen-column set in fixed order.
    pub fn defaults() -> Vec<Self> {
        IndicatorKind::ALL.into_iter().map(Self::default_for).collect()
    }

    pub fn kind(&self) -> IndicatorKind {
        match self {
            Self::MaRel { .. } => IndicatorKind::MaRel,
            Self::MacdHist { .. } => IndicatorKind::MacdHist,
            Self::Rsi { .. } => IndicatorKind::Rsi,
            Self::StochD { .. } => IndicatorKind::StochD,
            Self::WilliamsR { .. } => IndicatorKind::WilliamsR,
            Self::BollingerPctB { .. } => IndicatorKind::BollingerPctB,
            Self::ObvFlow { .. } => IndicatorKind::ObvFlow,
            Self::AdlFlow { .. } => IndicatorKind::AdlFlow,
            Self::AroonOsc { .. } => IndicatorKind::AroonOsc,
            Self::AtrRel { .. } => IndicatorKind::AtrRel,
            Self::IchimokuCloud { .. } => IndicatorKind::IchimokuCloud,
            Self::PsarRel { .. } => IndicatorKind::PsarRel,
            Self::FibPos { .. } => IndicatorKind::FibPos,
            Self::Cmf { .. } => IndicatorKind::Cmf,
            Self::Adx { .. } => IndicatorKind::Adx,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Leading days without a defined value.
    pub fn warm_up(&self) -> usize {
        match *self {
            Self::MaRel { period }
            | Self::WilliamsR { period }
            | Self::BollingerPctB { period, .. }
            | Self::FibPos { period }
            | Self::Cmf { period } => period - 1,
            Self::Rsi { period }
            | Self::ObvFlow { period }
            | Self::AdlFlow { period }
            | Self::AroonOsc { period }
            | Self::AtrRel { period } => period,
            Self::MacdHist { fast, slow, signal } => fast.max(slow) + signal - 2,
            Self::StochD { k_period, d_period } => k_period + d_period - 2,
            Self::IchimokuCloud {
                conversion,
                base,
                span,
                displacement,
            } => conversion.max(base).max(span) + displacement,
            Self::PsarRel { .. } => 1,
            Self::Adx { period } => 2 * period - 1,
        }
    }

    pub fn validate(&self) -> Result<(), IndicatorError> {
        let bad = |reason: &str| {
            Err(IndicatorError::Params {
                name: self.name(),
                reason: reason.to_string(),
            })
        };
        match *self {
            Self::MaRel { period }
            | Self::Rsi { period }
            | Self::WilliamsR { period }
            | Self::ObvFlow { period }
            | Self::AdlFlow { period }
            | Self::AroonOsc { period }
            | Self::AtrRel { period }
            | Self::FibPos { period }
            | Self::Cmf { period }
            | Self::Adx { period } => {
                if period < 1 {
                    return bad("period must be >= 1");
                }
            }
            Self::MacdHist { fast, slow, signal } => {
                if fast < 1 || slow < 1 || signal < 1 {
                    return bad("periods must be >= 1");
                }
                if fast >= slow {
                    return bad("fast period must be shorter than slow period");
                }
            }
            Self::StochD { k_period, d_period } => {
                if k_period < 1 || d_period < 1 {
                    return bad("periods must be >= 1");
                }
            }
            Self::BollingerPctB { period, width } => {
                if period < 1 {
                    return bad("period must be >= 1");
                }
                if !(width.is_finite() && width > 0.0) {
                    return bad("band width must be > 0");
                }
            }
            Self::IchimokuCloud {
                conversion,
                base,
                span,
                displacement,
            } => {
                if conversion < 1 || base < 1 || span < 1 || displacement < 1 {
                    return bad("periods must be >= 1");
                }
            }
            Self::PsarRel { start, step, max } => {
                if !(start > 0.0 && start <= max && step > 0.0 && max.is_finite()) {
                    return bad("need 0 < start <= max and step > 0");
                }
            }
        }
        Ok(())
    }

    /// Overrides one named parameter (`indicators.<kind>.<param>` in config).
    pub fn set_param(&mut self, param: &str, value: f64) -> Result<(), IndicatorError> {
        let kind = self.name();
        let unknown = || IndicatorError::UnknownParam {
            kind: kind.to_string(),
            param: param.to_string(),
        };
        let as_period = |v: f64| -> Result<usize, IndicatorError> {
            if v.fract() == 0.0 && (1.0..=10_000.0).contains(&v) {
                Ok(v as usize)
            } else {
                Err(IndicatorError::Params {
                    name: kind,
                    reason: format!("`{param}` must be a positive integer, got {v}"),
                })
            }
        };
        match (self, param) {
            (
                Self::MaRel { period }
                | Self::Rsi { period }
                | Self::WilliamsR { period }
                | Self::BollingerPctB { period, .. }
                | Self::ObvFlow { period }
                | Self::AdlFlow { period }
                | Self::AroonOsc { period }
                | Self::AtrRel { period }
                | Self::FibPos { period }
                | Self::Cmf { period }
                | Self::Adx { period },
                "period",
            ) => *period = as_period(value)?,
            (Self::BollingerPctB { width, .. }, "width") => *width = value,
            (Self::MacdHist { fast, .. }, "fast") => *fast = as_period(value)?,
            (Self::MacdHist { slow, .. }, "slow") => *slow = as_period(value)?,
            (Self::MacdHist { signal, .. }, "signal") => *signal = as_period(value)?,
            (Self::StochD { k_period, .. }, "k_period") => *k_period = as_period(value)?,
            (Self::StochD { d_period, .. }, "d_period") => *d_period = as_period(value)?,
            (Self::IchimokuCloud { conversion, .. }, "conversion") => *conversion = as_period(value)?,
            (Self::IchimokuCloud { base, .. }, "base") => *base = as_period(value)?,
            (Self::IchimokuCloud { span, .. }, "span") => *span = as_period(value)?,
            (Self::IchimokuCloud { displacement, .. }, "displacement") => {
                *displacement = as_period(value)?
            }
            (Self::PsarRel { start, .. }, "start") => *start = value,
            (Self::PsarRel { step, .. }, "step") => *step = value,
            (Self::PsarRel { max, .. }, "max") => *max = value,
            _ => return Err(unknown()),
        }
        Ok(())
    }
}

/// Values from index `warm_up` onward, aligned to the series dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorColumn {
    pub name: String,
    pub warm_up: usize,
    pub values: Vec<f64>,
}

impl IndicatorColumn {
    /// Value at series index `t`, if defined.
    pub fn at(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.warm_up)
            .and_then(|i| self.values.get(i))
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet {
    pub columns: Vec<IndicatorColumn>,
    /// Maximum warm-up over the columns.
    pub warm_up: usize,
}

struct Channels {
    high: Vec<f64>,
    low: Vec<f64>,
    close: Vec<f64>,
    volume: Vec<f64>,
}

pub fn compute_indicator(series: &BarSeries, spec: &IndicatorSpec) -> Result<IndicatorColumn, IndicatorError> {
    spec.validate()?;
    let warm_up = spec.warm_up();
    let n = series.len();
    if n <= warm_up {
        return Err(IndicatorError::TooShort {
            name: spec.name(),
            len: n,
            warm_up,
        });
    }
    let ch = Channels {
        high: series.highs(),
        low: series.lows(),
        close: series.closes(),
        volume: series.volumes(),
    };
    let full = match *spec {
        IndicatorSpec::MaRel { period } => ma_rel(&ch, period),
        IndicatorSpec::MacdHist { fast, slow, signal } => macd_hist(&ch, fast, slow, signal),
        IndicatorSpec::Rsi { period } => rsi(&ch, period),
        IndicatorSpec::StochD { k_period, d_period } => stoch_d(&ch, k_period, d_period),
        IndicatorSpec::WilliamsR { period } => williams_r(&ch, period),
        IndicatorSpec::BollingerPctB { period, width } => bollinger_pct_b(&ch, period, width),
        IndicatorSpec::ObvFlow { period } => obv_flow(&ch, period),
        IndicatorSpec::AdlFlow { period } => adl_flow(&ch, period),
        IndicatorSpec::AroonOsc { period } => aroon_osc(&ch, period),
        IndicatorSpec::AtrRel { period } => atr_rel(&ch, period),
        IndicatorSpec::IchimokuCloud {
            conversion,
            base,
            span,
            displacement,
        } => ichimoku_cloud(&ch, conversion, base, span, displacement),
        IndicatorSpec::PsarRel { start, step, max } => psar_rel(&ch, start, step, max),
        IndicatorSpec::FibPos { period } => fib_pos(&ch, period),
        IndicatorSpec::Cmf { period } => cmf(&ch, period),
        IndicatorSpec::Adx { period } => adx(&ch, period),
    };
    debug_assert_eq!(full.len(), n);
    let values = full[warm_up..].to_vec();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(IndicatorError::NonFinite {
            name: spec.name(),
            index: warm_up + i,
        });
    }
    Ok(IndicatorColumn {
        name: spec.name().to_string(),
        warm_up,
        values,
    })
}

pub fn compute_all(series: &BarSeries, specs: &[IndicatorSpec]) -> Result<IndicatorSet, IndicatorError> {
    if specs.is_empty() {
        return Err(IndicatorError::NoSpecs);
    }
    for (i, spec) in specs.iter().enumerate() {
        if specs[..i].iter().any(|s| s.name() == spec.name()) {
            return Err(IndicatorError::Duplicate(spec.name().to_string()));
        }
    }
    let columns = specs
        .par_iter()
        .map(|spec| compute_indicator(series, spec))
        .collect::<Result<Vec<_>, _>>()?;
    let warm_up = columns.iter().map(|c| c.warm_up).max().unwrap_or(0);
    Ok(IndicatorSet { columns, warm_up })
}

// Each helper returns a full-length vector; entries before the warm-up are NaN.

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn window_max(xs: &[f64], t: usize, p: usize) -> f64 {
    xs[t + 1 - p..=t].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn window_min(xs: &[f64], t: usize, p: usize) -> f64 {
    xs[t + 1 - p..=t].iter().copied().fold(f64::INFINITY, f64::min)
}

/// EMA over `xs[first..]` seeded with the mean of its first `period` values.
fn ema(xs: &[f64], first: usize, period: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; xs.len()];
    let seed_at = first + period - 1;
    if seed_at >= xs.len() {
        return out;
    }
    let alpha = 2.0 / (period as f64 + 1.0);
    out[seed_at] = mean(&xs[first..=seed_at]);
    for t in seed_at + 1..xs.len() {
        out[t] = alpha * xs[t] + (1.0 - alpha) * out[t - 1];
    }
    out
}

/// Wilder smoothing over `xs[first..]`, seeded with the mean of its first `period` values.
fn wilder(xs: &[f64], first: usize, period: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; xs.len()];
    let seed_at = first + period - 1;
    if seed_at >= xs.len() {
        return out;
    }
    let p = period as f64;
    out[seed_at] = mean(&xs[first..=seed_at]);
    for t in seed_at + 1..xs.len() {
        out[t] = (out[t - 1] * (p - 1.0) + xs[t]) / p;
    }
    out
}

fn true_range(ch: &Channels) -> Vec<f64> {
    let mut tr = Vec::with_capacity(ch.close.len());
    tr.push(ch.high[0] - ch.low[0]);
    for t in 1..ch.close.len() {
        let prev = ch.close[t - 1];
        tr.push(
            (ch.high[t] - ch.low[t])
                .max((ch.high[t] - prev).abs())
                .max((ch.low[t] - prev).abs()),
        );
    }
    tr
}

/// Close location value; 0 when high == low.
fn clv(ch: &Channels, t: usize) -> f64 {
    let (h, l, c) = (ch.high[t], ch.low[t], ch.close[t]);
    if h == l {
        0.0
    } else {
        ((c - l) - (h - c)) / (h - l)
    }
}

fn ma_rel(ch: &Channels, p: usize) -> Vec<f64> {
    let c = &ch.close;
    let mut out = vec![f64::NAN; c.len()];
    for t in p - 1..c.len() {
        let sma = mean(&c[t + 1 - p..=t]);
        out[t] = (c[t] - sma) / sma;
    }
    out
}

fn macd_hist(ch: &Channels, fast: usize, slow: usize, signal: usize) -> Vec<f64> {
    let c = &ch.close;
    let fast_ema = ema(c, 0, fast);
    let slow_ema = ema(c, 0, slow);
    let start = slow - 1;
    let mut line = vec![0.0; c.len()];
    for t in start..c.len() {
        line[t] = fast_ema[t] - slow_ema[t];
    }
    let sig = ema(&line, start, signal);
    let mut out = vec![f64::NAN; c.len()];
    for t in start + signal - 1..c.len() {
        out[t] = (line[t] - sig[t]) / c[t];
    }
    out
}

fn rsi(ch: &Channels, p: usize) -> Vec<f64> {
    let c = &ch.close;
    let mut gains = vec![0.0; c.len()];
    let mut losses = vec![0.0; c.len()];
    for t in 1..c.len() {
        gains[t] = (c[t] - c[t - 1]).max(0.0);
        losses[t] = (c[t - 1] - c[t]).max(0.0);
    }
    let avg_gain = wilder(&gains, 1, p);
    let avg_loss = wilder(&losses, 1, p);
    let mut out = vec![f64::NAN; c.len()];
    for t in p..c.len() {
        out[t] = if avg_loss[t] == 0.0 {
            100.0
        } else if avg_gain[t] == 0.0 {
            0.0
        } else {
            100.0 - 100.0 / (1.0 + avg_gain[t] / avg_loss[t])
        };
    }
    out
}

fn stoch_d(ch: &Channels, k: usize, d: usize) -> Vec<f64> {
    let n = ch.close.len();
    let mut pct_k = vec![f64::NAN; n];
    for t in k - 1..n {
        let hh = window_max(&ch.high, t, k);
        let ll = window_min(&ch.low, t, k);
        pct_k[t] = if hh == ll {
            50.0
        } else {
            100.0 * (ch.close[t] - ll) / (hh - ll)
        };
    }
    let mut out = vec![f64::NAN; n];
    for t in k + d - 2..n {
        out[t] = mean(&pct_k[t + 1 - d..=t]);
    }
    out
}

fn williams_r(ch: &Channels, p: usize) -> Vec<f64> {
    let n = ch.close.len();
    let mut out = vec![f64::NAN; n];
    for t in p - 1..n {
        let hh = window_max(&ch.high, t, p);
        let ll = window_min(&ch.low, t, p);
        out[t] = if hh == ll {
            -50.0
        } else {
            -100.0 * (hh - ch.close[t]) / (hh - ll)
        };
    }
    out
}

fn bollinger_pct_b(ch: &Channels, p: usize, width: f64) -> Vec<f64> {
    let c = &ch.close;
    let mut out = vec![f64::NAN; c.len()];
    for t in p - 1..c.len() {
        let w = &c[t + 1 - p..=t];
        let m = mean(w);
        let var = w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / p as f64;
        let sd = var.sqrt();
        out[t] = if sd <= 1e-12 * m.abs() {
            0.5
        } else {
            (c[t] - (m - width * sd)) / (2.0 * width * sd)
        };
    }
    out
}

/// Windowed flow `sum(w_j v_j) / sum(v_j)` over `j in (t - p, t]`, defined from `first`.
fn volume_flow(ch: &Channels, p: usize, first: usize, weight: impl Fn(usize) -> f64) -> Vec<f64> {
    let n = ch.close.len();
    let mut out = vec![f64::NAN; n];
    for t in first..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in t + 1 - p..=t {
            num += weight(j) * ch.volume[j];
            den += ch.volume[j];
        }
        out[t] = if den == 0.0 { 0.0 } else { num / den };
    }
    out
}

fn obv_flow(ch: &Channels, p: usize) -> Vec<f64> {
    let c = &ch.close;
    volume_flow(ch, p, p, |j| {
        if c[j] > c[j - 1] {
            1.0
        } else if c[j] < c[j - 1] {
            -1.0
        } else {
            0.0
        }
    })
}

fn adl_flow(ch: &Channels, p: usize) -> Vec<f64> {
    volume_flow(ch, p, p, |j| clv(ch, j))
}

fn cmf(ch: &Channels, p: usize) -> Vec<f64> {
    volume_flow(ch, p, p - 1, |j| clv(ch, j))
}

fn aroon_osc(ch: &Channels, p: usize) -> Vec<f64> {
    let n = ch.close.len();
    let mut out = vec![f64::NAN; n];
    for t in p..n {
        let mut hi = t - p;
        let mut lo = t - p;
        for j in t - p..=t {
            // >= / <= keep the most recent extreme on ties
            if ch.high[j] >= ch.high[hi] {
                hi = j;
            }
            if ch.low[j] <= ch.low[lo] {
                lo = j;
            }
        }
        let up = 100.0 * (p - (t - hi)) as f64 / p as f64;
        let down = 100.0 * (p - (t - lo)) as f64 / p as f64;
        out[t] = up - down;
    }
    out
}

fn atr_rel(ch: &Channels, p: usize) -> Vec<f64> {
    let atr = wilder(&true_range(ch), 1, p);
    let mut out = vec![f64::NAN; ch.close.len()];
    for t in p..ch.close.len() {
        out[t] = atr[t] / ch.close[t];
    }
    out
}

fn ichimoku_cloud(ch: &Channels, conversion: usize, base: usize, span: usize, disp: usize) -> Vec<f64> {
    let n = ch.close.len();
    // Midpoint of the `period` bars before `s`.
    let mid = |period: usize, s: usize| -> f64 {
        let hh = window_max(&ch.high, s - 1, period);
        let ll = window_min(&ch.low, s - 1, period);
        (hh + ll) / 2.0
    };
    let longest = conversion.max(base).max(span);
    let mut out = vec![f64::NAN; n];
    for t in longest + disp..n {
        let s = t - disp;
        let span_a = (mid(conversion, s) + mid(base, s)) / 2.0;
        let span_b = mid(span, s);
        out[t] = (ch.close[t] - (span_a + span_b) / 2.0) / ch.close[t];
    }
    out
}

fn psar_rel(ch: &Channels, start: f64, step: f64, max: f64) -> Vec<f64> {
    let (h, l, c) = (&ch.high, &ch.low, &ch.close);
    let n = c.len();
    let mut out = vec![f64::NAN; n];
    let mut rising = c[1] >= c[0];
    let (mut sar, mut extreme) = if rising {
        (l[0].min(l[1]), h[0].max(h[1]))
    } else {
        (h[0].max(h[1]), l[0].min(l[1]))
    };
    let mut af = start;
    out[1] = (c[1] - sar) / c[1];
    for t in 2..n {
        let mut next = sar + af * (extreme - sar);
        if rising {
            next = next.min(l[t - 1]).min(l[t - 2]);
            if l[t] < next {
                rising = false;
                next = extreme;
                extreme = l[t];
                af = start;
            } else if h[t] > extreme {
                extreme = h[t];
                af = (af + step).min(max);
            }
        } else {
            next = next.max(h[t - 1]).max(h[t - 2]);
            if h[t] > next {
                rising = true;
                next = extreme;
                extreme = h[t];
                af = start;
            } else if l[t] < extreme {
                extreme = l[t];
                af = (af + step).min(max);
            }
        }
        sar = next;
        out[t] = (c[t] - sar) / c[t];
    }
    out
}

fn fib_pos(ch: &Channels, p: usize) -> Vec<f64> {
    let n = ch.close.len();
    let mut out = vec![f64::NAN; n];
    for t in p - 1..n {
        let hh = window_max(&ch.high, t, p);
        let ll = window_min(&ch.low, t, p);
        out[t] = if hh == ll {
            0.5
        } else {
            (hh - ch.close[t]) / (hh - ll)
        };
    }
    out
}

fn adx(ch: &Channels, p: usize) -> Vec<f64> {
    let n = ch.close.len();
    let tr = true_range(ch);
    let mut plus_dm = vec![0.0; n];
    let mut minus_dm = vec![0.0; n];
    for t in 1..n {
        let up = ch.high[t] - ch.high[t - 1];
        let down = ch.low[t - 1] - ch.low[t];
        if up > down && up > 0.0 {
            plus_dm[t] = up;
        }
        if down > up && down > 0.0 {
            minus_dm[t] = down;
        }
    }
    let s_tr = wilder(&tr, 1, p);
    let s_plus = wilder(&plus_dm, 1, p);
    let s_minus = wilder(&minus_dm, 1, p);
    let mut dx = vec![0.0; n];
    for t in p..n {
        let (pdi, mdi) = if s_tr[t] == 0.0 {
            (0.0, 0.0)
        } else {
            (100.0 * s_plus[t] / s_tr[t], 100.0 * s_minus[t] / s_tr[t])
        };
        dx[t] = if pdi + mdi == 0.0 {
            0.0
        } else {
            100.0 * (pdi - mdi).abs() / (pdi + mdi)
        };
    }
    wilder(&dx, p, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Bar;
    use chrono::NaiveDate;

    fn series(rows: &[(f64, f64, f64, f64, f64)]) -> BarSeries {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let bars = rows
            .iter()
            .enumerate()
            .map(|(i, &(open, high, low, close, volume))| Bar {
                date: start + chrono::Days::new(i as u64),
                open,
                high,
                low,
                close,
                volume,
            })
            .collect();
        BarSeries::new("T", bars).unwrap()
    }

    fn rising(n: usize) -> BarSeries {
        let rows: Vec<_> = (0..n)
            .map(|i| {
                let c = 10.0 + i as f64;
                (c - 0.5, c + 0.5, c - 1.0, c, 100.0)
            })
            .collect();
        series(&rows)
    }

    #[test]
    fn rsi_all_gains_is_100() {
        let col = compute_indicator(&rising(20), &IndicatorSpec::Rsi { period: 14 }).unwrap();
        assert_eq!(col.warm_up, 14);
        assert_eq!(col.values.len(), 6);
        assert!(col.values.iter().all(|&v| v == 100.0));
    }

    #[test]
    fn bollinger_at_mean_is_half() {
        // 19 alternating closes around 10 then a close exactly at the window mean.
        let mut rows = Vec::new();
        for i in 0..19 {
            let c = if i % 2 == 0 { 9.0 } else { 11.0 };
            rows.push((c, c, c, c, 1.0));
        }
        // Window of 20 = the 19 above + x with mean x: sum19 + x = 20x => x = sum19 / 19.
        let sum19: f64 = rows.iter().map(|r| r.3).sum();
        let x = sum19 / 19.0;
        rows.push((x, x, x, x, 1.0));
        let s = series(&rows);
        let col = compute_indicator(&s, &IndicatorSpec::default_for(IndicatorKind::BollingerPctB)).unwrap();
        assert!((col.at(19).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn atr_on_flat_bars_is_zero() {
        let rows = vec![(5.0, 5.0, 5.0, 5.0, 10.0); 30];
        let col = compute_indicator(&series(&rows), &IndicatorSpec::AtrRel { period: 14 }).unwrap();
        assert!(col.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flat_bars_hit_degenerate_branches() {
        let rows = vec![(5.0, 5.0, 5.0, 5.0, 0.0); 100];
        let s = series(&rows);
        let set = compute_all(&s, &IndicatorSpec::defaults()).unwrap();
        let get = |name: &str| set.columns.iter().find(|c| c.name == name).unwrap();
        assert!(get("stoch_d").values.iter().all(|&v| v == 50.0));
        assert!(get("williams_r").values.iter().all(|&v| v == -50.0));
        assert!(get("bollinger_pct_b").values.iter().all(|&v| v == 0.5));
        assert!(get("fib_pos").values.iter().all(|&v| v == 0.5));
        assert!(get("obv_flow").values.iter().all(|&v| v == 0.0));
        assert!(get("cmf").values.iter().all(|&v| v == 0.0));
        assert!(get("adx").values.iter().all(|&v| v == 0.0));
        assert!(get("rsi").values.iter().all(|&v| v == 100.0));
    }

    #[test]
    fn default_set_shape() {
        let s = rising(120);
        let set = compute_all(&s, &IndicatorSpec::defaults()).unwrap();
        assert_eq!(set.columns.len(), 15);
        assert_eq!(set.warm_up, 78);
        let expected = [9, 33, 14, 15, 13, 19, 10, 10, 25, 14, 78, 1, 59, 19, 27];
        let got: Vec<_> = set.columns.iter().map(|c| c.warm_up).collect();
        assert_eq!(got, expected);
        for c in &set.columns {
            assert_eq!(c.values.len(), 120 - c.warm_up);
        }
    }

    #[test]
    fn errors() {
        let s = rising(20);
        assert_eq!(compute_all(&s, &[]), Err(IndicatorError::NoSpecs));
        let dup = [IndicatorSpec::Rsi { period: 14 }, IndicatorSpec::Rsi { period: 7 }];
        assert_eq!(compute_all(&s, &dup), Err(IndicatorError::Duplicate("rsi".into())));
        assert!(matches!(
            compute_indicator(&s, &IndicatorSpec::FibPos { period: 60 }),
            Err(IndicatorError::TooShort { .. })
        ));
        assert!(matches!(
            compute_indicator(&s, &IndicatorSpec::Rsi { period: 0 }),
            Err(IndicatorError::Params { .. })
        ));
        assert!(matches!(
            compute_indicator(&s, &IndicatorSpec::PsarRel { start: 0.3, step: 0.02, max: 0.2 }),
            Err(IndicatorError::Params { .. })
        ));
    }

    #[test]
    fn param_overrides() {
        let mut spec = IndicatorSpec::default_for(IndicatorKind::MacdHist);
        spec.set_param("signal", 5.0).unwrap();
        assert_eq!(spec, IndicatorSpec::MacdHist { fast: 12, slow: 26, signal: 5 });
        assert!(spec.set_param("period", 3.0).is_err());
        assert!(spec.set_param("fast", 2.5).is_err());
        assert_eq!(IndicatorKind::from_name("adx").unwrap(), IndicatorKind::Adx);
        assert!(IndicatorKind::from_name("vwap").is_err());
    }
}
