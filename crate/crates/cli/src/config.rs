//! Run configuration: one TOML file, every key optional.
//!
//! Precedence is flags over file over defaults. Values are checked against
//! the library preconditions as soon as the file is loaded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sarf::evaluate::{digest, SearchConfig, SearchSpace};
use sarf::forest::{HyperParams, MaxFeatures};
use sarf::indicators::{IndicatorKind, IndicatorSpec};
use sarf::market_data::AlphaVantageConfig;
use sarf::preprocess::{LabelSpec, SmoothingParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Global seed: forest seed, and search seed unless `search.seed` is set.
    pub seed: u64,
    pub symbol: String,
    /// Row label in the comparison table.
    pub index_name: String,
    pub smoothing: SmoothingConfig,
    pub label: LabelConfig,
    /// `indicators.<kind>.<param> = value`
    pub indicators: BTreeMap<String, BTreeMap<String, f64>>,
    pub sentiment: SentimentConfig,
    pub prune: PruneConfig,
    pub split: SplitConfig,
    pub pca: PcaConfig,
    pub ridge: RidgeConfig,
    pub cv: CvConfig,
    pub search: SearchSection,
    pub forest: ForestConfig,
    pub market_data: MarketDataConfig,
    /// Input locations; not part of the config hash.
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            symbol: "SPY".into(),
            index_name: "S&P 500".into(),
            smoothing: SmoothingConfig::default(),
            label: LabelConfig::default(),
            indicators: BTreeMap::new(),
            sentiment: SentimentConfig::default(),
            prune: PruneConfig::default(),
            split: SplitConfig::default(),
            pca: PcaConfig::default(),
            ridge: RidgeConfig::default(),
            cv: CvConfig::default(),
            search: SearchSection::default(),
            forest: ForestConfig::default(),
            market_data: MarketDataConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub alpha: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            alpha: SmoothingParams::DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelConfig {
    pub horizon: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            horizon: LabelSpec::DEFAULT_HORIZON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Technical columns only.
    None,
    Lexicon,
    /// Recorded scores keyed by text hash (`paths.scores`).
    Fixture,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SentimentConfig {
    pub provider: ProviderKind,
    pub decay: f64,
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
    pub parallelism: usize,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Lexicon,
            decay: sarf::sentiment::DEFAULT_DECAY,
            endpoint: None,
            timeout_secs: 30,
            retries: 2,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneConfig {
    pub threshold: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { threshold: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_fraction: 0.6667 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcaConfig {
    pub enabled: bool,
    pub variance_target: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            variance_target: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RidgeConfig {
    pub lambda: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self { lambda: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub folds: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { folds: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub trials: usize,
    /// Falls back to the global seed.
    pub seed: Option<u64>,
    pub space: SearchSpace,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            trials: 50,
            seed: None,
            space: SearchSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Omit for unlimited depth.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        let p = HyperParams::default();
        Self {
            n_trees: p.n_trees,
            max_depth: p.max_depth,
            min_samples_split: p.min_samples_split,
            min_samples_leaf: p.min_samples_leaf,
            max_features: p.max_features,
            bootstrap: p.bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketDataConfig {
    pub base_url: String,
    pub min_interval_secs: f64,
    pub max_attempts: u32,
    pub backoff_secs: f64,
    pub timeout_secs: f64,
}

impl Default for MarketDataConfig {
    fn default() -> Self {
        let d = AlphaVantageConfig::default();
        Self {
            base_url: d.base_url,
            min_interval_secs: d.min_interval.as_secs_f64(),
            max_attempts: d.max_attempts,
            backoff_secs: d.backoff.as_secs_f64(),
            timeout_secs: d.timeout.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub bars: Option<PathBuf>,
    pub news: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("config `{key}`: {reason}"))
}

fn secs(key: &str, v: f64) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(v).map_err(|_| invalid(key, format!("expected seconds >= 0, got {v}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Data(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        SmoothingParams::new(self.smoothing.alpha).map_err(|e| invalid("smoothing.alpha", e))?;
        LabelSpec::new(self.label.horizon).map_err(|e| invalid("label.horizon", e))?;
        self.indicator_specs()?;
        let s = &self.sentiment;
        if !(0.0..=1.0).contains(&s.decay) {
            return Err(invalid("sentiment.decay", format!("must lie in [0, 1], got {}", s.decay)));
        }
        if s.parallelism == 0 {
            return Err(invalid("sentiment.parallelism", "must be >= 1"));
        }
        if s.provider == ProviderKind::Http && s.endpoint.is_none() {
            return Err(invalid("sentiment.endpoint", "required when provider = \"http\""));
        }
        let t = self.prune.threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(invalid("prune.threshold", format!("must lie in (0, 1), got {t}")));
        }
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(invalid("split.train_fraction", format!("must lie in (0, 1), got {f}")));
        }
        let v = self.pca.variance_target;
        if !(v > 0.0 && v <= 1.0) {
            return Err(invalid("pca.variance_target", format!("must lie in (0, 1], got {v}")));
        }
        let l = self.ridge.lambda;
        if !(l.is_finite() && l >= 0.0) {
            return Err(invalid("ridge.lambda", format!("must be finite and >= 0, got {l}")));
        }
        if self.cv.folds < 2 {
            return Err(invalid("cv.folds", "must be >= 2"));
        }
        if self.search.trials == 0 {
            return Err(invalid("search.trials", "must be >= 1"));
        }
        self.search.space.validate().map_err(|e| invalid("search.space", e))?;
        self.hyper_params().validate().map_err(|e| invalid("forest", e))?;
        self.alphavantage()?;
        Ok(())
    }

    /// Default indicator set with the `indicators` overrides applied.
    pub fn indicator_specs(&self) -> Result<Vec<IndicatorSpec>, CliError> {
        let mut specs = IndicatorSpec::defaults();
        for (kind, params) in &self.indicators {
            let key = format!("indicators.{kind}");
            let k = IndicatorKind::from_name(kind).map_err(|e| invalid(&key, e))?;
            let spec = &mut specs[k as usize];
            for (param, value) in params {
                spec.set_param(param, *value)
                    .map_err(|e| invalid(&format!("{key}.{param}"), e))?;
            }
            spec.validate().map_err(|e| invalid(&key, e))?;
        }
        Ok(specs)
    }

    pub fn smoothing(&self) -> SmoothingParams {
        SmoothingParams::new(self.smoothing.alpha).expect("validated")
    }

    pub fn labels(&self) -> LabelSpec {
        LabelSpec::new(self.label.horizon).expect("validated")
    }

    /// Forest parameters for a plain `train` without a tuning result.
    pub fn hyper_params(&self) -> HyperParams {
        let f = &self.forest;
        HyperParams {
            n_trees: f.n_trees,
            max_depth: f.max_depth,
            min_samples_split: f.min_samples_split,
            min_samples_leaf: f.min_samples_leaf,
            max_features: f.max_features,
            seed: self.seed,
            bootstrap: f.bootstrap,
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            n_trials: self.search.trials,
            folds: self.cv.folds,
            search_seed: self.search.seed.unwrap_or(self.seed),
            forest_seed: self.seed,
            space: self.search.space.clone(),
        }
    }

    pub fn alphavantage(&self) -> Result<AlphaVantageConfig, CliError> {
        let m = &self.market_data;
        if m.max_attempts == 0 {
            return Err(invalid("market_data.max_attempts", "must be >= 1"));
        }
        Ok(AlphaVantageConfig {
            base_url: m.base_url.clone(),
            min_interval: secs("market_data.min_interval_secs", m.min_interval_secs)?,
            max_attempts: m.max_attempts,
            backoff: secs("market_data.backoff_secs", m.backoff_secs)?,
            timeout: secs("market_data.timeout_secs", m.timeout_secs)?,
        })
    }

    /// SHA-256 of the canonical JSON form, input paths excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths = PathsConfig::default();
        digest(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["sed = 1", "[prune]\nthreshhold = 0.5", "[bogus]\nx = 1"] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn indicator_overrides() {
        let c = RunConfig::parse("[indicators.rsi]\nperiod = 21\n[indicators.psar_rel]\nmax = 0.3").unwrap();
        let specs = c.indicator_specs().unwrap();
        assert_eq!(specs[2], IndicatorSpec::Rsi { period: 21 });
        assert!(RunConfig::parse("[indicators.rsi]\nspan = 3").is_err());
        assert!(RunConfig::parse("[indicators.nope]\nperiod = 3").is_err());
        assert!(RunConfig::parse("[indicators.rsi]\nperiod = 2.5").is_err());
    }

    #[test]
    fn preconditions_checked_at_load() {
        for text in [
            "[smoothing]\nalpha = 0.0",
            "[label]\nhorizon = 0",
            "[sentiment]\ndecay = 1.5",
            "[sentiment]\nprovider = \"http\"",
            "[prune]\nthreshold = 1.0",
            "[split]\ntrain_fraction = 1.0",
            "[pca]\nvariance_target = 0.0",
            "[ridge]\nlambda = -1.0",
            "[cv]\nfolds = 1",
            "[search]\ntrials = 0",
            "[forest]\nmin_samples_split = 1",
            "[forest]\nmax_features = 1.5",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_ignores_paths_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.bars = Some("elsewhere.csv".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 7;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn search_seed_defaults_to_global() {
        let c = RunConfig::parse("seed = 9").unwrap();
        assert_eq!(c.search_config().search_seed, 9);
        let c = RunConfig::parse("seed = 9\n[search]\nseed = 3").unwrap();
        assert_eq!((c.search_config().search_seed, c.search_config().forest_seed), (3, 9));
    }
}
