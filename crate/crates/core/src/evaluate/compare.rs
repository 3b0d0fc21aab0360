use serde::{Deserialize, Serialize};

use super::{evaluate_model, random_search, EvalError, EvalReport, SearchConfig, SearchResult};
use crate::features::{train_size, FeatureFrame};
use crate::forest::{train_forest, ForestModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Row label in the accuracy table, e.g. `S&P 500`.
    pub index_name: String,
    pub train_fraction: f64,
    pub search: SearchConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            index_name: "S&P 500".into(),
            train_fraction: 0.6667,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub feature_names: Vec<String>,
    pub search: SearchResult,
    pub importances: Vec<f64>,
    pub test: EvalReport,
    #[serde(skip)]
    pub model: Option<ForestModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub index_name: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub baseline: ModelRun,
    pub sarf: ModelRun,
    /// SARF test accuracy minus baseline test accuracy.
    pub accuracy_delta: f64,
    pub table: String,
}

/// Accuracy table with one row per index, two decimals.
pub fn format_table(rows: &[(String, f64, f64)]) -> String {
    let mut out = String::from("Index | Traditional Random Forest | Optimized Random Forest (SARF)\n");
    for (name, base, sarf) in rows {
        out.push_str(&format!("{name} | {base:.2} | {sarf:.2}\n"));
    }
    out
}

fn run(frame: &FeatureFrame, n_train: usize, search: &SearchConfig) -> Result<ModelRun, EvalError> {
    let train = frame.slice_rows(0..n_train)?;
    let test = frame.slice_rows(n_train..frame.n_rows())?;
    let result = random_search(&train, search)?;
    let model = train_forest(&train, &result.best)?;
    let report = evaluate_model(&model, &test)?;
    Ok(ModelRun {
        feature_names: frame.names().to_vec(),
        search: result,
        importances: model.importances.clone(),
        test: report,
        model: Some(model),
    })
}

/// Tunes, trains and tests a technical-only baseline and SARF on the same
/// chronological split with the same search budget and seeds.
pub fn compare_models(
    with_sentiment: &FeatureFrame,
    technical_only: &FeatureFrame,
    config: &CompareConfig,
) -> Result<Comparison, EvalError> {
    if with_sentiment.dates() != technical_only.dates() {
        return Err(EvalError::Mismatch("the two frames cover different dates".into()));
    }
    let labels = with_sentiment.labels().ok_or(EvalError::MissingLabels)?;
    if technical_only.labels() != Some(labels) {
        return Err(EvalError::Mismatch("the two frames carry different labels".into()));
    }
    let n = with_sentiment.n_rows();
    let n_train = train_size(n, config.train_fraction)?;
    let baseline = run(technical_only, n_train, &config.search)?;
    let sarf = run(with_sentiment, n_train, &config.search)?;
    let accuracy_delta = sarf.test.metrics.accuracy - baseline.test.metrics.accuracy;
    let table = format_table(&[(
        config.index_name.clone(),
        baseline.test.metrics.accuracy,
        sarf.test.metrics.accuracy,
    )]);
    Ok(Comparison {
        index_name: config.index_name.clone(),
        train_rows: n_train,
        test_rows: n - n_train,
        baseline,
        sarf,
        accuracy_delta,
        table,
    })
}
