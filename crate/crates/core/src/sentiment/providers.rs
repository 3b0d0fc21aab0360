use std::collections::HashMap;
use std::io::BufRead;
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{SentimentError, SentimentProvider, SentimentScore};

/// Lowercase hex SHA-256 of the UTF-8 text.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

const POSITIVE_WORDS: &[&str] = &[
    "beat", "beats", "bullish", "boost", "boosts", "confidence", "gain", "gains", "growth",
    "upbeat", "high", "improve", "improves", "jump", "jumps", "optimism", "outperform",
    "profit", "profits", "rally", "rallies", "record", "rebound", "rise", "rises", "robust",
    "soar", "soars", "strong", "surge", "surges", "upgrade", "upgrades",
];

const NEGATIVE_WORDS: &[&str] = &[
    "bearish", "crash", "crashes", "cut", "cuts", "decline", "declines", "deepen", "default",
    "downgrade", "drop", "drops", "fall", "falls", "fears", "loss", "losses", "miss",
    "plunge", "plunges", "recession", "risk", "risks", "selloff", "slump", "slumps",
    "weak", "worsens", "worries",
];

/// Word-count scorer over a small bundled lexicon; a deterministic offline
/// stand-in for a language model.
///
/// With `p` positive and `q` negative hits the probabilities are
/// `p/(p+q+1)`, `q/(p+q+1)`, `1/(p+q+1)`; no hits gives `(0, 0, 1)`.
#[derive(Debug, Default, Clone)]
pub struct LexiconProvider;

impl SentimentProvider for LexiconProvider {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn score(&self, text: &str) -> Result<SentimentScore, SentimentError> {
        let (mut pos, mut neg) = (0usize, 0usize);
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let token = token.to_lowercase();
            if POSITIVE_WORDS.contains(&token.as_str()) {
                pos += 1;
            } else if NEGATIVE_WORDS.contains(&token.as_str()) {
                neg += 1;
            }
        }
        if pos + neg == 0 {
            return Ok(SentimentScore::neutral());
        }
        let total = (pos + neg + 1) as f64;
        SentimentScore::from_probabilities(pos as f64 / total, neg as f64 / total, 1.0 / total)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureRow {
    hash: String,
    positive: f64,
    negative: f64,
    neutral: f64,
}

/// Pre-recorded scores keyed by [`content_hash`] of the article text.
#[derive(Debug, Clone, Default)]
pub struct FixtureProvider {
    scores: HashMap<String, SentimentScore>,
}

impl FixtureProvider {
    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, SentimentError> {
        let mut scores = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: FixtureRow = serde_json::from_str(&line).map_err(|e| SentimentError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let score = SentimentScore::from_probabilities(row.positive, row.negative, row.neutral)
                .map_err(|e| SentimentError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            scores.insert(row.hash.to_ascii_lowercase(), score);
        }
        Ok(Self { scores })
    }

    pub fn insert(&mut self, text: &str, score: SentimentScore) {
        self.scores.insert(content_hash(text), score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl SentimentProvider for FixtureProvider {
    fn name(&self) -> &str {
        "fixture"
    }

    fn score(&self, text: &str) -> Result<SentimentScore, SentimentError> {
        let hash = content_hash(text);
        self.scores
            .get(&hash)
            .copied()
            .ok_or(SentimentError::FixtureMiss(hash))
    }
}

#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    pub retry_delay: Duration,
}

impl HttpProviderConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
            retry_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Deserialize)]
struct HttpScore {
    positive: f64,
    negative: f64,
    neutral: f64,
}

/// POSTs `{"text": ...}` and expects `{"positive", "negative", "neutral"}` back.
pub struct HttpProvider {
    agent: ureq::Agent,
    config: HttpProviderConfig,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, config }
    }

    fn attempt(&self, body: &str) -> Result<HttpScore, String> {
        let mut resp = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("status {status}: {text}"));
        }
        serde_json::from_str(&text).map_err(|e| format!("bad response body: {e}"))
    }
}

impl SentimentProvider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn score(&self, text: &str) -> Result<SentimentScore, SentimentError> {
        let body = serde_json::json!({ "text": text }).to_string();
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                thread::sleep(self.config.retry_delay);
            }
            match self.attempt(&body) {
                Ok(s) => return SentimentScore::from_probabilities(s.positive, s.negative, s.neutral),
                Err(e) => last = e,
            }
        }
        Err(SentimentError::Provider(format!(
            "{} after {} attempt(s): {last}",
            self.config.endpoint,
            self.config.retries + 1
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_signs() {
        let p = LexiconProvider.score("profit surge beats estimates").unwrap();
        assert!(p.positive > p.negative && p.composite > 0.0);
        assert_eq!(p.positive, 0.75);
        let n = LexiconProvider.score("Shares PLUNGE after downgrade").unwrap();
        assert!(n.composite < 0.0);
        let z = LexiconProvider.score("the committee met on tuesday").unwrap();
        assert_eq!(z, SentimentScore::neutral());
    }

    #[test]
    fn fixture_lookup_by_hash() {
        let text = "SPY: index trades in narrow range (wire 00007)";
        let line = format!(
            "{{\"hash\": \"{}\", \"positive\": 0.2, \"negative\": 0.1, \"neutral\": 0.7}}\n",
            content_hash(text)
        );
        let fx = FixtureProvider::from_jsonl(line.as_bytes()).unwrap();
        assert_eq!(fx.len(), 1);
        assert!((fx.score(text).unwrap().composite - 0.1).abs() < 1e-12);
        // an edited text no longer matches its recorded score
        assert!(matches!(
            fx.score("SPY: index trades in narrow range (wire 00008)"),
            Err(SentimentError::FixtureMiss(_))
        ));
        let bad = FixtureProvider::from_jsonl(
            "{\"hash\": \"ab\", \"positive\": 0.9, \"negative\": 0.9, \"neutral\": 0.9}".as_bytes(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn known_hash() {
        assert_eq!(
            content_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
