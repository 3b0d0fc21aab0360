//! Bagged CART random forest with Gini splits.
//!
//! Tree `i` draws its bootstrap sample and then all of its per-node feature
//! subsets from `SplitMix64::stream(seed, i)`, so a forest is bit-identical
//! for a seed no matter how many threads train it.

mod tree;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureFrame;
use crate::rng::SplitMix64;

pub use tree::{train_tree, Dataset, TreeNode};

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("no training rows")]
    Empty,
    #[error("training frame has no labels")]
    MissingLabels,
    #[error("labels must be 0 or 1")]
    Label,
    #[error("{values} values do not form {rows} rows of {cols} columns")]
    Shape { values: usize, cols: usize, rows: usize },
    #[error("sample index {0} is out of range")]
    SampleIndex(usize),
    #[error("invalid hyperparameter: {0}")]
    Params(String),
    #[error("row has {got} features, model expects {expected}")]
    Width { expected: usize, got: usize },
    #[error("feature columns differ from the model: expected [{expected}], found [{found}]")]
    Schema { expected: String, found: String },
    #[error("model JSON: {0}")]
    Json(String),
}

/// Features tried at each node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaxFeaturesRepr", into = "MaxFeaturesRepr")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    /// Share of all columns, in (0, 1].
    Fraction(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MaxFeaturesRepr {
    Name(String),
    Fraction(f64),
}

impl TryFrom<MaxFeaturesRepr> for MaxFeatures {
    type Error = String;
    fn try_from(r: MaxFeaturesRepr) -> Result<Self, String> {
        let m = match r {
            MaxFeaturesRepr::Name(s) => s.parse()?,
            MaxFeaturesRepr::Fraction(f) => MaxFeatures::Fraction(f),
        };
        m.validate()?;
        Ok(m)
    }
}

impl From<MaxFeatures> for MaxFeaturesRepr {
    fn from(m: MaxFeatures) -> Self {
        match m {
            MaxFeatures::Sqrt => MaxFeaturesRepr::Name("sqrt".into()),
            MaxFeatures::Log2 => MaxFeaturesRepr::Name("log2".into()),
            MaxFeatures::Fraction(f) => MaxFeaturesRepr::Fraction(f),
        }
    }
}

impl FromStr for MaxFeatures {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            other => other
                .parse::<f64>()
                .map(MaxFeatures::Fraction)
                .map_err(|_| format!("max_features must be sqrt, log2 or a fraction, got `{other}`")),
        }
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Log2 => f.write_str("log2"),
            MaxFeatures::Fraction(x) => write!(f, "{x}"),
        }
    }
}

impl MaxFeatures {
    fn validate(&self) -> Result<(), String> {
        match *self {
            MaxFeatures::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                Err(format!("max_features fraction must lie in (0, 1], got {f}"))
            }
            _ => Ok(()),
        }
    }

    /// Number of features for `p` columns: floor of the rule, at least 1.
    pub fn resolve(&self, p: usize) -> usize {
        let k = match *self {
            MaxFeatures::Sqrt => (p as f64).sqrt().floor(),
            MaxFeatures::Log2 => (p as f64).log2().floor(),
            MaxFeatures::Fraction(f) => (f * p as f64).floor(),
        };
        (k as usize).clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub n_trees: usize,
    /// `None` grows until another rule stops.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
    /// When false every tree sees the training rows once, in order.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
}

fn default_bootstrap() -> bool {
    true
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            seed: 42,
            bootstrap: true,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        let bad = |m: String| Err(ForestError::Params(m));
        if self.n_trees == 0 {
            return bad("n_trees must be >= 1".into());
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be >= 1".into());
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be >= 2".into());
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be >= 1".into());
        }
        self.max_features.validate().map_err(ForestError::Params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestModel {
    pub params: HyperParams,
    pub feature_names: Vec<String>,
    /// Class frequencies `[P(0), P(1)]` of the training labels.
    pub train_priors: [f64; 2],
    /// Mean decrease in impurity per feature, summing to 1 when any split exists.
    pub importances: Vec<f64>,
    pub trees: Vec<TreeNode>,
}

/// Trains on every row of a labeled frame.
pub fn train_forest(frame: &FeatureFrame, params: &HyperParams) -> Result<ForestModel, ForestError> {
    let labels = frame.labels().ok_or(ForestError::MissingLabels)?;
    let values: Vec<f64> = frame.rows().flatten().copied().collect();
    let data = Dataset::new(&values, frame.n_cols(), labels)?;
    let rows: Vec<usize> = (0..frame.n_rows()).collect();
    train_forest_on(&data, &rows, frame.names(), params)
}

/// Trains on the listed rows of `data`.
pub fn train_forest_on(
    data: &Dataset,
    rows: &[usize],
    feature_names: &[String],
    params: &HyperParams,
) -> Result<ForestModel, ForestError> {
    params.validate()?;
    if rows.is_empty() {
        return Err(ForestError::Empty);
    }
    if feature_names.len() != data.n_cols() {
        return Err(ForestError::Width {
            expected: data.n_cols(),
            got: feature_names.len(),
        });
    }
    if let Some(&bad) = rows.iter().find(|&&i| i >= data.n_rows()) {
        return Err(ForestError::SampleIndex(bad));
    }
    let n = rows.len();
    let grown: Vec<(TreeNode, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::stream(params.seed, i as u64);
            let mut samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rows[rng.below(n as u64) as usize]).collect()
            } else {
                rows.to_vec()
            };
            let mut grower = tree::Grower::new(*data, params, n);
            let root = grower.grow(&mut samples, 0, &mut rng);
            (root, grower.importance)
        })
        .collect();

    let mut importances = vec![0.0; data.n_cols()];
    for (_, imp) in &grown {
        for (acc, v) in importances.iter_mut().zip(imp) {
            *acc += v;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    let ones = rows.iter().filter(|&&i| data.labels()[i] == 1).count() as f64;
    Ok(ForestModel {
        params: params.clone(),
        feature_names: feature_names.to_vec(),
        train_priors: [1.0 - ones / n as f64, ones / n as f64],
        importances,
        trees: grown.into_iter().map(|(t, _)| t).collect(),
    })
}

impl ForestModel {
    fn check_width(&self, row: &[f64]) -> Result<(), ForestError> {
        if row.len() != self.feature_names.len() {
            return Err(ForestError::Width {
                expected: self.feature_names.len(),
                got: row.len(),
            });
        }
        Ok(())
    }

    /// Mean over trees of the leaf positive-class share.
    pub fn predict_proba_row(&self, row: &[f64]) -> Result<f64, ForestError> {
        self.check_width(row)?;
        let sum: f64 = self.trees.iter().map(|t| t.proba(row)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// 1 above 0.5, 0 below; exactly 0.5 goes to the more frequent training
    /// class, and to 0 if the priors are equal.
    pub fn decide(&self, proba: f64) -> u8 {
        if proba > 0.5 {
            1
        } else if proba < 0.5 {
            0
        } else {
            u8::from(self.train_priors[1] > self.train_priors[0])
        }
    }

    pub fn check_schema(&self, frame: &FeatureFrame) -> Result<(), ForestError> {
        if frame.names() != self.feature_names {
            return Err(ForestError::Schema {
                expected: self.feature_names.join(", "),
                found: frame.names().join(", "),
            });
        }
        Ok(())
    }

    /// Probabilities for every row; the frame's columns must match the model's.
    pub fn predict_proba(&self, frame: &FeatureFrame) -> Result<Vec<f64>, ForestError> {
        self.check_schema(frame)?;
        let rows: Vec<&[f64]> = frame.rows().collect();
        rows.par_iter().map(|r| self.predict_proba_row(r)).collect()
    }

    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<u8>, ForestError> {
        Ok(self.predict_proba(frame)?.into_iter().map(|p| self.decide(p)).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ForestError> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let model = Self::deserialize(&mut de).map_err(|e| ForestError::Json(e.to_string()))?;
        de.end().map_err(|e| ForestError::Json(e.to_string()))?;
        model.params.validate()?;
        if model.trees.is_empty() || model.importances.len() != model.feature_names.len() {
            return Err(ForestError::Json("inconsistent model".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(n0: u64, n1: u64) -> TreeNode {
        TreeNode::Leaf { counts: [n0, n1] }
    }

    fn model(trees: Vec<TreeNode>, priors: [f64; 2]) -> ForestModel {
        ForestModel {
            params: HyperParams::default(),
            feature_names: vec!["a".into()],
            train_priors: priors,
            importances: vec![0.0],
            trees,
        }
    }

    #[test]
    fn probability_is_mean_leaf_share() {
        let m = model(vec![leaf(1, 3)], [0.5, 0.5]);
        assert_eq!(m.predict_proba_row(&[0.0]).unwrap(), 0.75);
        let split = TreeNode::Split {
            feature: 0,
            threshold: 0.0,
            left: Box::new(leaf(4, 0)),
            right: Box::new(leaf(1, 1)),
        };
        let m = model(vec![leaf(1, 3), split, leaf(0, 5)], [0.5, 0.5]);
        let want = (0.75 + 0.5 + 1.0) / 3.0;
        assert_eq!(m.predict_proba_row(&[1.0]).unwrap(), want);
        assert_eq!(
            m.predict_proba_row(&[1.0, 2.0]),
            Err(ForestError::Width {
                expected: 1,
                got: 2
            })
        );
    }

    #[test]
    fn half_goes_to_prior() {
        assert_eq!(model(vec![leaf(1, 1)], [0.4, 0.6]).decide(0.5), 1);
        assert_eq!(model(vec![leaf(1, 1)], [0.6, 0.4]).decide(0.5), 0);
        assert_eq!(model(vec![leaf(1, 1)], [0.5, 0.5]).decide(0.5), 0);
    }

    #[test]
    fn max_features_rules() {
        assert_eq!(MaxFeatures::Sqrt.resolve(19), 4);
        assert_eq!(MaxFeatures::Log2.resolve(19), 4);
        assert_eq!(MaxFeatures::Log2.resolve(1), 1);
        assert_eq!(MaxFeatures::Fraction(0.5).resolve(19), 9);
        assert_eq!(MaxFeatures::Fraction(0.01).resolve(19), 1);
        let json = serde_json::to_string(&MaxFeatures::Fraction(0.5)).unwrap();
        assert_eq!(json, "0.5");
        assert_eq!(serde_json::from_str::<MaxFeatures>("\"log2\"").unwrap(), MaxFeatures::Log2);
        assert!(serde_json::from_str::<MaxFeatures>("1.5").is_err());
    }

    #[test]
    fn params_validation() {
        let p = HyperParams {
            min_samples_split: 1,
            ..HyperParams::default()
        };
        assert!(matches!(p.validate(), Err(ForestError::Params(_))));
        assert!(HyperParams::default().validate().is_ok());
    }
}
