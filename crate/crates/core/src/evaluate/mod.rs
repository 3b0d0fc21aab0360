//! Classification metrics, ROC and PR curves, blocked cross-validation,
//! random hyperparameter search, and the with/without-sentiment comparison.

mod compare;
mod search;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{FeatureError, FeatureFrame};
use crate::forest::{ForestError, ForestModel};

pub use compare::{compare_models, format_table, CompareConfig, Comparison, ModelRun};
pub use search::{kfold_splits, random_search, SearchConfig, SearchResult, SearchSpace, Trial};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{predictions} predictions for {labels} labels")]
    Length { predictions: usize, labels: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("labels must be 0 or 1")]
    Label,
    #[error("AUC is undefined when all labels are {0}")]
    SingleClass(u8),
    #[error("cannot cut {rows} rows into {folds} folds (need folds >= 2 and rows >= folds)")]
    Folds { rows: usize, folds: usize },
    #[error("trial {0}: every validation fold has a single class")]
    AllFoldsSkipped(usize),
    #[error("n_trials must be >= 1")]
    NoTrials,
    #[error("search space: {0}")]
    Space(String),
    #[error("frames disagree: {0}")]
    Mismatch(String),
    #[error("frame has no labels")]
    MissingLabels,
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    /// 0 when nothing was predicted positive.
    pub precision: f64,
    /// 0 when there are no positive labels.
    pub recall: f64,
    /// 0 when precision + recall = 0.
    pub f1: f64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(self) -> Metrics {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            confusion: self,
            accuracy: ratio(self.tp + self.tn, self.total()),
            precision,
            recall,
            f1,
        }
    }
}

fn check_pair<T>(predictions: &[T], labels: &[u8]) -> Result<(), EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::Length {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(EvalError::Label);
    }
    Ok(())
}

/// Positive class is 1 ("up").
pub fn confusion_metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics, EvalError> {
    check_pair(predictions, labels)?;
    if predictions.iter().any(|&p| p > 1) {
        return Err(EvalError::Label);
    }
    let mut m = ConfusionMatrix {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => m.tp += 1,
            (1, _) => m.fp += 1,
            (_, 1) => m.fn_ += 1,
            _ => m.tn += 1,
        }
    }
    Ok(m.metrics())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    /// Score at or above which rows count as positive; `None` for the
    /// anchor point before any row is admitted.
    pub threshold: Option<f64>,
}

/// Cumulative (tp, fp, threshold) after each group of tied scores,
/// scanning from the highest score down.
fn sweep(scores: &[f64], labels: &[u8]) -> Result<(Vec<(u64, u64, f64)>, u64, u64), EvalError> {
    check_pair(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass(labels[0]));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut steps = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        steps.push((tp, fp, s));
    }
    Ok((steps, pos, neg))
}

/// ROC points from (0, 0) to (1, 1), one per distinct score, and the
/// trapezoidal area under them.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(Vec<CurvePoint>, f64), EvalError> {
    let (steps, pos, neg) = sweep(scores, labels)?;
    let mut points = vec![CurvePoint {
        x: 0.0,
        y: 0.0,
        threshold: None,
    }];
    // Integrate in counts, divide once: exact for the concordance identity.
    let mut area2 = 0u128;
    let (mut ptp, mut pfp) = (0u64, 0u64);
    for &(tp, fp, s) in &steps {
        area2 += (fp - pfp) as u128 * (tp + ptp) as u128;
        points.push(CurvePoint {
            x: fp as f64 / neg as f64,
            y: tp as f64 / pos as f64,
            threshold: Some(s),
        });
        (ptp, pfp) = (tp, fp);
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok((points, auc))
}

/// Precision-recall points: x = recall, y = precision. Starts at (0, 1)
/// and ends at recall 1 with precision equal to the positive share.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<CurvePoint>, EvalError> {
    let (steps, pos, _) = sweep(scores, labels)?;
    let mut points = vec![CurvePoint {
        x: 0.0,
        y: 1.0,
        threshold: None,
    }];
    points.extend(steps.iter().map(|&(tp, fp, s)| CurvePoint {
        x: tp as f64 / pos as f64,
        y: tp as f64 / (tp + fp) as f64,
        threshold: Some(s),
    }));
    Ok(points)
}

/// `x,y,threshold`; the anchor point has an empty threshold.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("x,y,threshold\n");
    for p in points {
        let _ = write!(out, "{},{},", p.x, p.y);
        if let Some(t) = p.threshold {
            let _ = write!(out, "{t}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub dataset_id: String,
    pub rows: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub auc: Option<f64>,
    pub roc_points: Vec<CurvePoint>,
    pub pr_points: Vec<CurvePoint>,
}

/// SHA-256 hex of arbitrary bytes, used for model and dataset identities.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Scores `model` on a labeled frame. Single-class frames get metrics but
/// no AUC and no curves.
pub fn evaluate_model(model: &ForestModel, frame: &FeatureFrame) -> Result<EvalReport, EvalError> {
    let labels = frame.labels().ok_or(EvalError::MissingLabels)?;
    let proba = model.predict_proba(frame)?;
    let predictions: Vec<u8> = proba.iter().map(|&p| model.decide(p)).collect();
    let metrics = confusion_metrics(&predictions, labels)?;
    let (roc, auc, pr) = match roc_auc(&proba, labels) {
        Ok((roc, auc)) => (roc, Some(auc), pr_curve(&proba, labels)?),
        Err(EvalError::SingleClass(_)) => (Vec::new(), None, Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        model_id: digest(model.to_json().as_bytes()),
        dataset_id: digest(frame.to_csv().as_bytes()),
        rows: frame.n_rows(),
        metrics,
        auc,
        roc_points: roc,
        pr_points: pr,
    })
}
