//! Bars and news to a pruned feature frame, with everything the report needs.

use sarf::features::{
    apply_pca, assemble, fit_pca, prune_correlated, ridge_fit, train_size, FeatureFrame,
    PcaTransform, PruneReport, RidgeDiagnostic,
};
use sarf::indicators::compute_all;
use sarf::market_data::BarSeries;
use sarf::preprocess::{make_labels, smooth_series};
use sarf::sentiment::{aggregate_daily, filter_for_symbol, score_all, NewsItem, SentimentProvider};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentimentSummary {
    pub provider: String,
    /// Items kept after the symbol filter.
    pub articles: usize,
    /// Trading days with at least one article.
    pub days_with_news: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RidgeOutcome {
    Fit(RidgeDiagnostic),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub symbol: String,
    pub bars: usize,
    pub horizon: usize,
    pub warm_up: usize,
    pub labeled_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub pre_prune_columns: Vec<String>,
    pub columns: Vec<String>,
    pub prune: PruneReport,
    pub ridge: RidgeOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaTransform>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<SentimentSummary>,
}

pub struct Featurized {
    /// All technical and sentiment columns before pruning.
    pub raw: FeatureFrame,
    /// What the model sees.
    pub frame: FeatureFrame,
    pub summary: FeatureSummary,
}

/// smooth -> indicators -> sentiment -> assemble -> prune -> optional PCA.
///
/// `news` is ignored when `provider` is `None`.
pub fn featurize(
    bars: &BarSeries,
    news: Vec<NewsItem>,
    provider: Option<&dyn SentimentProvider>,
    config: &RunConfig,
) -> Result<Featurized, CliError> {
    let smoothed = smooth_series(bars, config.smoothing())?;
    let labels = make_labels(bars, config.labels())?;
    let indicators = compute_all(&smoothed, &config.indicator_specs()?)?;
    let calendar = bars.dates();

    let (daily, sentiment) = match provider {
        Some(p) => {
            let items = filter_for_symbol(news, bars.symbol());
            let scored = score_all(p, &items, config.sentiment.parallelism)?;
            let daily = aggregate_daily(&scored, &calendar, config.sentiment.decay)?;
            let summary = SentimentSummary {
                provider: p.name().to_string(),
                articles: items.len(),
                days_with_news: daily.iter().filter(|d| d.article_count > 0).count(),
            };
            (Some(daily), Some(summary))
        }
        None => (None, None),
    };

    let raw = assemble(&indicators.columns, daily.as_deref(), &calendar, &labels)?;
    let n = raw.n_rows();
    let n_train = train_size(n, config.split.train_fraction)?;
    let (pruned, prune) = prune_correlated(&raw, config.prune.threshold, 0..n_train)?;
    let ridge = match ridge_fit(&pruned, 0..n_train, config.ridge.lambda) {
        Ok(fit) => RidgeOutcome::Fit(fit),
        Err(e) => RidgeOutcome::Failed { error: e.to_string() },
    };
    let (frame, pca) = if config.pca.enabled {
        let pca = fit_pca(&pruned, 0..n_train, config.pca.variance_target)?;
        (apply_pca(&pca, &pruned)?, Some(pca))
    } else {
        (pruned, None)
    };

    let summary = FeatureSummary {
        symbol: bars.symbol().to_string(),
        bars: bars.len(),
        horizon: labels.horizon,
        warm_up: indicators.warm_up,
        labeled_rows: n,
        train_rows: n_train,
        test_rows: n - n_train,
        pre_prune_columns: raw.names().to_vec(),
        columns: frame.names().to_vec(),
        prune,
        ridge,
        pca,
        sentiment,
    };
    Ok(Featurized { raw, frame, summary })
}
