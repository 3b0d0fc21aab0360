//! News sentiment: per-article scores from a pluggable provider, folded into
//! four daily features.
//!
//! Day alignment: an article belongs to the first trading day whose close
//! (21:00 UTC) is at or after its timestamp. Articles before the first
//! calendar day or after the last close are dropped. Days without news
//! carry the previous day's means scaled by `decay`, with the neutral mean
//! absorbing the released probability mass.

mod providers;

use std::io::BufRead;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use providers::{content_hash, FixtureProvider, HttpProvider, HttpProviderConfig, LexiconProvider};

/// Feature column names in fixed order.
pub const SENTIMENT_FEATURES: [&str; 4] = [
    "sent_positive",
    "sent_negative",
    "sent_neutral",
    "sent_composite",
];

pub const DEFAULT_DECAY: f64 = 0.9;

/// US equity close (16:00 EST) expressed in UTC.
pub const MARKET_CLOSE_UTC: NaiveTime = match NaiveTime::from_hms_opt(21, 0, 0) {
    Some(t) => t,
    None => panic!(),
};

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("news text is empty (line {0})")]
    EmptyText(usize),
    #[error("invalid sentiment probabilities ({0})")]
    InvalidScore(String),
    #[error("no fixture score for text hash {0}")]
    FixtureMiss(String),
    #[error("sentiment provider failed: {0}")]
    Provider(String),
    #[error("calendar is empty")]
    EmptyCalendar,
    #[error("calendar dates must be strictly increasing (at {0})")]
    Calendar(NaiveDate),
    #[error("decay must lie in [0, 1], got {0}")]
    Decay(f64),
    #[error("parallelism must be >= 1")]
    Parallelism,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SentimentError {
    /// True for failures of a remote scoring service.
    pub fn is_remote(&self) -> bool {
        matches!(self, Self::Provider(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub timestamp: DateTime<FixedOffset>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
}

/// Class probabilities plus the composite `positive - negative`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub positive: f64,
    pub negative: f64,
    pub neutral: f64,
    pub composite: f64,
}

impl SentimentScore {
    /// Validates raw probabilities. Sums within [0.99, 1.01] are renormalized.
    pub fn from_probabilities(positive: f64, negative: f64, neutral: f64) -> Result<Self, SentimentError> {
        let parts = [positive, negative, neutral];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SentimentError::InvalidScore(format!(
                "positive={positive}, negative={negative}, neutral={neutral}"
            )));
        }
        let sum = positive + negative + neutral;
        let (p, n, u) = if (sum - 1.0).abs() <= 1e-9 {
            (positive, negative, neutral)
        } else if (0.99..=1.01).contains(&sum) {
            (positive / sum, negative / sum, neutral / sum)
        } else {
            return Err(SentimentError::InvalidScore(format!(
                "probabilities sum to {sum}"
            )));
        };
        Ok(Self {
            positive: p,
            negative: n,
            neutral: u,
            composite: p - n,
        })
    }

    pub fn neutral() -> Self {
        Self {
            positive: 0.0,
            negative: 0.0,
            neutral: 1.0,
            composite: 0.0,
        }
    }
}

pub trait SentimentProvider: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, text: &str) -> Result<SentimentScore, SentimentError>;
}

pub fn score_text(provider: &dyn SentimentProvider, item: &NewsItem) -> Result<SentimentScore, SentimentError> {
    provider.score(&item.text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredItem {
    pub timestamp: DateTime<FixedOffset>,
    pub score: SentimentScore,
}

/// Scores every item with at most `parallelism` concurrent provider calls.
/// Output order follows input order.
pub fn score_all(
    provider: &dyn SentimentProvider,
    items: &[NewsItem],
    parallelism: usize,
) -> Result<Vec<ScoredItem>, SentimentError> {
    if parallelism == 0 {
        return Err(SentimentError::Parallelism);
    }
    let run = || {
        items
            .par_iter()
            .map(|item| {
                Ok(ScoredItem {
                    timestamp: item.timestamp,
                    score: score_text(provider, item)?,
                })
            })
            .collect::<Result<Vec<_>, SentimentError>>()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailySentiment {
    pub date: NaiveDate,
    pub mean_positive: f64,
    pub mean_negative: f64,
    pub mean_neutral: f64,
    pub mean_composite: f64,
    pub article_count: usize,
}

impl DailySentiment {
    pub fn features(&self) -> [f64; 4] {
        [
            self.mean_positive,
            self.mean_negative,
            self.mean_neutral,
            self.mean_composite,
        ]
    }
}

/// Trading day an article timestamp belongs to, before calendar snapping.
pub fn effective_date(ts: &DateTime<FixedOffset>) -> NaiveDate {
    let utc = ts.with_timezone(&Utc);
    let day = utc.date_naive();
    if utc.time() > MARKET_CLOSE_UTC {
        day.succ_opt().unwrap_or(day)
    } else {
        day
    }
}

pub fn aggregate_daily(
    items: &[ScoredItem],
    calendar: &[NaiveDate],
    decay: f64,
) -> Result<Vec<DailySentiment>, SentimentError> {
    if calendar.is_empty() {
        return Err(SentimentError::EmptyCalendar);
    }
    if let Some(w) = calendar.windows(2).find(|w| w[1] <= w[0]) {
        return Err(SentimentError::Calendar(w[1]));
    }
    if !(0.0..=1.0).contains(&decay) {
        return Err(SentimentError::Decay(decay));
    }

    let mut buckets: Vec<Vec<SentimentScore>> = vec![Vec::new(); calendar.len()];
    for item in items {
        let day = effective_date(&item.timestamp);
        if day < calendar[0] {
            continue;
        }
        let idx = calendar.partition_point(|d| *d < day);
        if let Some(bucket) = buckets.get_mut(idx) {
            bucket.push(item.score);
        }
    }

    let mut out = Vec::with_capacity(calendar.len());
    let mut prev: Option<DailySentiment> = None;
    for (date, mut scores) in calendar.iter().copied().zip(buckets) {
        let day = if scores.is_empty() {
            match prev {
                Some(p) => {
                    let pos = p.mean_positive * decay;
                    let neg = p.mean_negative * decay;
                    DailySentiment {
                        date,
                        mean_positive: pos,
                        mean_negative: neg,
                        mean_neutral: 1.0 - pos - neg,
                        mean_composite: p.mean_composite * decay,
                        article_count: 0,
                    }
                }
                None => DailySentiment {
                    date,
                    mean_positive: 0.0,
                    mean_negative: 0.0,
                    mean_neutral: 1.0,
                    mean_composite: 0.0,
                    article_count: 0,
                },
            }
        } else {
            // Summation order fixed by value so the means do not depend on input order.
            scores.sort_by(|a, b| {
                a.positive
                    .total_cmp(&b.positive)
                    .then(a.negative.total_cmp(&b.negative))
                    .then(a.neutral.total_cmp(&b.neutral))
            });
            let k = scores.len() as f64;
            let avg = |f: fn(&SentimentScore) -> f64| scores.iter().map(f).sum::<f64>() / k;
            DailySentiment {
                date,
                mean_positive: avg(|s| s.positive),
                mean_negative: avg(|s| s.negative),
                mean_neutral: avg(|s| s.neutral),
                mean_composite: avg(|s| s.composite),
                article_count: scores.len(),
            }
        };
        prev = Some(day);
        out.push(day);
    }
    Ok(out)
}

/// Parses the news JSON-lines format; blank lines are skipped.
pub fn parse_news_jsonl(reader: impl BufRead) -> Result<Vec<NewsItem>, SentimentError> {
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: NewsItem = serde_json::from_str(&line).map_err(|e| SentimentError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if item.text.trim().is_empty() {
            return Err(SentimentError::EmptyText(i + 1));
        }
        items.push(item);
    }
    Ok(items)
}

/// Items tagged with `symbol` (case-insensitive) plus untagged items.
pub fn filter_for_symbol(items: Vec<NewsItem>, symbol: &str) -> Vec<NewsItem> {
    items
        .into_iter()
        .filter(|it| {
            it.symbol
                .as_deref()
                .is_none_or(|s| s.eq_ignore_ascii_case(symbol))
        })
        .collect()
}
