//! Daily OHLCV bars: validation, CSV I/O, and the Alpha Vantage client.
//!
//! The on-disk format is a plain UTF-8 CSV with LF line endings and the
//! header `date,open,high,low,close,volume`. Numbers are written with the
//! shortest decimal representation that parses back to the same `f64`, so
//! `write_bars_csv` followed by `parse_bars_csv` is the identity.

mod alphavantage;

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alphavantage::{
    cache_path, parse_daily_response, AlphaVantageClient, AlphaVantageConfig, FetchOutcome,
    DEFAULT_BASE_URL,
};

pub const CSV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("expected header `date,open,high,low,close,volume`, found `{0}`")]
    Header(String),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("row {row} ({date}): violates `{rule}`")]
    Invariant {
        row: usize,
        date: NaiveDate,
        rule: &'static str,
    },
    #[error("row {row}: duplicate date {date}")]
    DuplicateDate { row: usize, date: NaiveDate },
    #[error("bar series is empty")]
    Empty,
    #[error("invalid symbol `{0}`")]
    Symbol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("http request failed: {0}")]
    Http(String),
    /// Error payload returned by the API, reproduced verbatim.
    #[error("{0}")]
    Api(String),
    #[error("rate limited after {attempts} attempt(s): {message}")]
    RateLimited { attempts: u32, message: String },
    #[error("response is missing `{0}`")]
    MissingField(String),
}

impl MarketDataError {
    /// True for failures of the remote data source rather than of the data itself.
    pub fn is_remote(&self) -> bool {
        matches!(
            self,
            Self::Http(_) | Self::Api(_) | Self::RateLimited { .. } | Self::MissingField(_)
        )
    }
}

/// One trading day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Bar {
    /// Returns the first violated invariant, if any.
    pub fn check(&self) -> Result<(), &'static str> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices > 0");
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err("volume >= 0");
        }
        if self.low > self.high {
            return Err("low <= high");
        }
        if self.high < self.open.max(self.close) {
            return Err("high >= max(open, close)");
        }
        if self.low > self.open.min(self.close) {
            return Err("low <= min(open, close)");
        }
        Ok(())
    }
}

/// Non-empty, strictly date-ordered bars for one symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSeries {
    symbol: String,
    bars: Vec<Bar>,
}

impl BarSeries {
    /// Validates every bar and the strict date order.
    pub fn new(symbol: impl Into<String>, bars: Vec<Bar>) -> Result<Self, MarketDataError> {
        if bars.is_empty() {
            return Err(MarketDataError::Empty);
        }
        for (i, bar) in bars.iter().enumerate() {
            bar.check().map_err(|rule| MarketDataError::Invariant {
                row: i + 1,
                date: bar.date,
                rule,
            })?;
            if i > 0 {
                let prev = bars[i - 1].date;
                if bar.date == prev {
                    return Err(MarketDataError::DuplicateDate {
                        row: i + 1,
                        date: bar.date,
                    });
                }
                if bar.date < prev {
                    return Err(MarketDataError::Malformed {
                        row: i + 1,
                        message: format!("date {} precedes {}", bar.date, prev),
                    });
                }
            }
        }
        Ok(Self {
            symbol: symbol.into(),
            bars,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    pub fn opens(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.open).collect()
    }

    pub fn highs(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.high).collect()
    }

    pub fn lows(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.low).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.volume).collect()
    }

    /// The first `len` bars.
    pub fn prefix(&self, len: usize) -> Result<Self, MarketDataError> {
        Self::new(self.symbol.clone(), self.bars[..len.min(self.bars.len())].to_vec())
    }
}

/// Parses the bar CSV format. Rows may appear in any order; the result is sorted.
///
/// Row numbers in errors are 1-based file lines (the header is line 1).
pub fn parse_bars_csv(symbol: &str, text: &str) -> Result<BarSeries, MarketDataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| MarketDataError::Header(e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(MarketDataError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut rows: Vec<(usize, Bar)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MarketDataError::Malformed {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != CSV_HEADER.len() {
            return Err(MarketDataError::Malformed {
                row,
                message: format!("expected 6 columns, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| {
            MarketDataError::Malformed {
                row,
                message: format!("bad date `{}`: {e}", &record[0]),
            }
        })?;
        let num = |i: usize| -> Result<f64, MarketDataError> {
            record[i]
                .parse::<f64>()
                .map_err(|_| MarketDataError::Malformed {
                    row,
                    message: format!("column `{}`: cannot parse `{}`", CSV_HEADER[i], &record[i]),
                })
        };
        let bar = Bar {
            date,
            open: num(1)?,
            high: num(2)?,
            low: num(3)?,
            close: num(4)?,
            volume: num(5)?,
        };
        bar.check()
            .map_err(|rule| MarketDataError::Invariant { row, date, rule })?;
        rows.push((row, bar));
    }
    if rows.is_empty() {
        return Err(MarketDataError::Empty);
    }

    rows.sort_by_key(|(_, bar)| bar.date);
    for pair in rows.windows(2) {
        if pair[0].1.date == pair[1].1.date {
            return Err(MarketDataError::DuplicateDate {
                row: pair[0].0.max(pair[1].0),
                date: pair[1].1.date,
            });
        }
    }
    BarSeries::new(symbol, rows.into_iter().map(|(_, bar)| bar).collect())
}

pub fn read_bars_csv(symbol: &str, path: &Path) -> Result<BarSeries, MarketDataError> {
    let text = std::fs::read_to_string(path)?;
    parse_bars_csv(symbol, &text)
}

/// Serializes bars in ascending date order, LF line endings.
pub fn write_bars_csv(series: &BarSeries) -> String {
    let mut out = String::with_capacity(series.len() * 48 + 32);
    out.push_str(&CSV_HEADER.join(","));
    out.push('\n');
    for b in series.bars() {
        // f64's Display is the shortest representation that round-trips.
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            b.date.format("%Y-%m-%d"),
            b.open,
            b.high,
            b.low,
            b.close,
            b.volume
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "date,open,high,low,close,volume\n";

    #[test]
    fn single_row() {
        let s = parse_bars_csv("SPY", &format!("{HEADER}2015-01-02,10,11,9,10.5,1000\n")).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.bars()[0].close, 10.5);
        assert_eq!(s.bars()[0].volume, 1000.0);
    }

    #[test]
    fn descending_rows_come_back_ascending() {
        let text = format!(
            "{HEADER}2015-01-06,10,11,9,10,1\n2015-01-05,10,11,9,10,1\n2015-01-02,10,11,9,10,1\n"
        );
        let s = parse_bars_csv("SPY", &text).unwrap();
        let dates: Vec<_> = s.dates().iter().map(|d| d.to_string()).collect();
        assert_eq!(dates, ["2015-01-02", "2015-01-05", "2015-01-06"]);
    }

    #[test]
    fn high_below_close_names_rule_and_row() {
        let text = format!("{HEADER}2015-01-02,10,11,9,10,1\n2015-01-05,8,9,7,10,1\n");
        let err = parse_bars_csv("SPY", &text).unwrap_err();
        match &err {
            MarketDataError::Invariant { row, rule, .. } => {
                assert_eq!(*row, 3);
                assert_eq!(*rule, "high >= max(open, close)");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("high >= max(open, close)"));
    }

    #[test]
    fn malformed_rows() {
        let wrong_cols = parse_bars_csv("X", &format!("{HEADER}2015-01-02,10,11,9,10\n"));
        assert!(matches!(wrong_cols, Err(MarketDataError::Malformed { row: 2, .. })));
        let bad_num = parse_bars_csv("X", &format!("{HEADER}2015-01-02,10,eleven,9,10,1\n"));
        assert!(matches!(bad_num, Err(MarketDataError::Malformed { row: 2, .. })));
        let bad_date = parse_bars_csv("X", &format!("{HEADER}2015/01/02,10,11,9,10,1\n"));
        assert!(matches!(bad_date, Err(MarketDataError::Malformed { .. })));
        let header = parse_bars_csv("X", "date,o,h,l,c,v\n2015-01-02,10,11,9,10,1\n");
        assert!(matches!(header, Err(MarketDataError::Header(_))));
        assert!(matches!(parse_bars_csv("X", HEADER), Err(MarketDataError::Empty)));
    }

    #[test]
    fn duplicate_date_rejected() {
        let text = format!("{HEADER}2015-01-02,10,11,9,10,1\n2015-01-02,10,11,9,10,1\n");
        assert!(matches!(
            parse_bars_csv("X", &text),
            Err(MarketDataError::DuplicateDate { .. })
        ));
    }

    #[test]
    fn negative_volume_and_price() {
        let v = parse_bars_csv("X", &format!("{HEADER}2015-01-02,10,11,9,10,-1\n"));
        assert!(matches!(v, Err(MarketDataError::Invariant { rule: "volume >= 0", .. })));
        let p = parse_bars_csv("X", &format!("{HEADER}2015-01-02,0,11,0,10,1\n"));
        assert!(matches!(p, Err(MarketDataError::Invariant { rule: "prices > 0", .. })));
    }

    #[test]
    fn writes_shortest_form() {
        let s = parse_bars_csv("X", &format!("{HEADER}2015-01-02,10.0,11.50,9,10.25,1000\n")).unwrap();
        assert_eq!(
            write_bars_csv(&s),
            format!("{HEADER}2015-01-02,10,11.5,9,10.25,1000\n")
        );
    }
}
