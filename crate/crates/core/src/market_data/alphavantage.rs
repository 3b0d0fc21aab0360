//! Sequential, rate-limited client for the `TIME_SERIES_DAILY` endpoint.
//!
//! Alpha Vantage has no index symbols; use ETF proxies such as SPY
//! (S&P 500), QQQ (NASDAQ-100) and DIA (Dow Jones). Prices are stored as
//! returned by the endpoint, without split or dividend adjustment.

use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use serde_json::Value;

use super::{parse_bars_csv, write_bars_csv, Bar, BarSeries, MarketDataError};

pub const DEFAULT_BASE_URL: &str = "https://www.alphavantage.co/query";

const SERIES_KEY: &str = "Time Series (Daily)";
const FIELDS: [&str; 5] = ["1. open", "2. high", "3. low", "4. close", "5. volume"];

#[derive(Debug, Clone)]
pub struct AlphaVantageConfig {
    pub base_url: String,
    /// Minimum spacing between two requests; the free tier allows about 5/min.
    pub min_interval: Duration,
    /// Total attempts when the API answers with a rate-limit note.
    pub max_attempts: u32,
    /// First backoff delay; doubles on every further rate-limit answer.
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for AlphaVantageConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            min_interval: Duration::from_secs(13),
            max_attempts: 3,
            backoff: Duration::from_secs(15),
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchOutcome {
    pub series: BarSeries,
    /// Set when the remote call failed and the cached copy was returned.
    pub stale: bool,
    /// The remote failure behind a stale result.
    pub warning: Option<String>,
    pub cache_path: PathBuf,
}

pub struct AlphaVantageClient {
    agent: ureq::Agent,
    config: AlphaVantageConfig,
    last_request: Option<Instant>,
}

enum Attempt {
    Done(String),
    RateLimited(String),
}

impl AlphaVantageClient {
    pub fn new(config: AlphaVantageConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            config,
            last_request: None,
        }
    }

    /// Full daily history for `symbol` (upper-cased), refreshing `<cache_dir>/<SYMBOL>.csv`.
    ///
    /// A failed remote call falls back to the cache when one exists.
    pub fn fetch_daily(
        &mut self,
        symbol: &str,
        api_key: &str,
        cache_dir: &Path,
    ) -> Result<FetchOutcome, MarketDataError> {
        let cache_path = cache_path(cache_dir, symbol)?;
        let symbol = symbol.to_ascii_uppercase();
        let symbol = symbol.as_str();
        match self.fetch_remote(symbol, api_key) {
            Ok(series) => {
                std::fs::create_dir_all(cache_dir)?;
                std::fs::write(&cache_path, write_bars_csv(&series))?;
                Ok(FetchOutcome {
                    series,
                    stale: false,
                    warning: None,
                    cache_path,
                })
            }
            Err(err) if err.is_remote() && cache_path.exists() => {
                let text = std::fs::read_to_string(&cache_path)?;
                let series = parse_bars_csv(symbol, &text)?;
                Ok(FetchOutcome {
                    series,
                    stale: true,
                    warning: Some(err.to_string()),
                    cache_path,
                })
            }
            Err(err) => Err(err),
        }
    }

    fn fetch_remote(&mut self, symbol: &str, api_key: &str) -> Result<BarSeries, MarketDataError> {
        let attempts = self.config.max_attempts.max(1);
        let mut delay = self.config.backoff;
        let mut last_note = String::new();
        for attempt in 1..=attempts {
            match self.request_once(symbol, api_key)? {
                Attempt::Done(body) => return parse_daily_response(symbol, &body),
                Attempt::RateLimited(note) => {
                    last_note = note;
                    if attempt < attempts {
                        thread::sleep(delay);
                        delay = delay.saturating_mul(2);
                    }
                }
            }
        }
        Err(MarketDataError::RateLimited {
            attempts,
            message: last_note,
        })
    }

    fn request_once(&mut self, symbol: &str, api_key: &str) -> Result<Attempt, MarketDataError> {
        if let Some(last) = self.last_request {
            let elapsed = last.elapsed();
            if elapsed < self.config.min_interval {
                thread::sleep(self.config.min_interval - elapsed);
            }
        }
        self.last_request = Some(Instant::now());

        let mut response = self
            .agent
            .get(&self.config.base_url)
            .query("function", "TIME_SERIES_DAILY")
            .query("symbol", symbol)
            .query("outputsize", "full")
            .query("apikey", api_key)
            .call()
            .map_err(|e| MarketDataError::Http(e.to_string()))?;
        let status = response.status();
        let body = response
            .body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| MarketDataError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(MarketDataError::Http(format!("status {status}")));
        }

        let json: Value = serde_json::from_str(&body)
            .map_err(|e| MarketDataError::Http(format!("invalid JSON body: {e}")))?;
        if let Some(msg) = json.get("Error Message").and_then(Value::as_str) {
            return Err(MarketDataError::Api(msg.to_string()));
        }
        for key in ["Note", "Information"] {
            if let Some(msg) = json.get(key).and_then(Value::as_str) {
                return Ok(Attempt::RateLimited(msg.to_string()));
            }
        }
        Ok(Attempt::Done(body))
    }
}

/// Cache file for a symbol. Symbols are restricted to `[A-Za-z0-9.^-]`.
pub fn cache_path(cache_dir: &Path, symbol: &str) -> Result<PathBuf, MarketDataError> {
    let ok = !symbol.is_empty()
        && symbol
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '^' | '-'));
    if !ok {
        return Err(MarketDataError::Symbol(symbol.to_string()));
    }
    Ok(cache_dir.join(format!("{}.csv", symbol.to_ascii_uppercase())))
}

/// Parses a `TIME_SERIES_DAILY` JSON body into a validated series.
pub fn parse_daily_response(symbol: &str, body: &str) -> Result<BarSeries, MarketDataError> {
    let json: Value = serde_json::from_str(body)
        .map_err(|e| MarketDataError::Http(format!("invalid JSON body: {e}")))?;
    if let Some(msg) = json.get("Error Message").and_then(Value::as_str) {
        return Err(MarketDataError::Api(msg.to_string()));
    }
    let series = json
        .get(SERIES_KEY)
        .and_then(Value::as_object)
        .ok_or_else(|| MarketDataError::MissingField(SERIES_KEY.to_string()))?;

    let mut bars = Vec::with_capacity(series.len());
    for (day, fields) in series {
        let date = NaiveDate::parse_from_str(day, "%Y-%m-%d")
            .map_err(|_| MarketDataError::MissingField(format!("valid date (got `{day}`)")))?;
        let mut values = [0.0; 5];
        for (slot, key) in values.iter_mut().zip(FIELDS) {
            let raw = fields
                .get(key)
                .and_then(Value::as_str)
                .ok_or_else(|| MarketDataError::MissingField(format!("`{key}` on {day}")))?;
            *slot = raw
                .trim()
                .parse()
                .map_err(|_| MarketDataError::MissingField(format!("numeric `{key}` on {day}")))?;
        }
        bars.push(Bar {
            date,
            open: values[0],
            high: values[1],
            low: values[2],
            close: values[3],
            volume: values[4],
        });
    }
    bars.sort_by_key(|b| b.date);
    BarSeries::new(symbol, bars)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_path_rejects_path_tricks() {
        let dir = Path::new("/tmp/cache");
        assert_eq!(cache_path(dir, "spy").unwrap(), dir.join("SPY.csv"));
        assert!(cache_path(dir, "../etc").is_err());
        assert!(cache_path(dir, "").is_err());
    }

    #[test]
    fn error_payload_is_verbatim() {
        let body = r#"{"Error Message": "Invalid API call. Please retry or visit the documentation."}"#;
        let err = parse_daily_response("SPY", body).unwrap_err();
        assert_eq!(
            err.to_string(),
            "Invalid API call. Please retry or visit the documentation."
        );
    }

    #[test]
    fn missing_series_and_fields() {
        let err = parse_daily_response("SPY", r#"{"Meta Data": {}}"#).unwrap_err();
        assert!(matches!(err, MarketDataError::MissingField(_)));
        let body = r#"{"Time Series (Daily)": {"2024-01-02": {"1. open": "1", "2. high": "2", "3. low": "0.5", "4. close": "1.5"}}}"#;
        let err = parse_daily_response("SPY", body).unwrap_err();
        assert!(err.to_string().contains("5. volume"), "{err}");
    }
}
