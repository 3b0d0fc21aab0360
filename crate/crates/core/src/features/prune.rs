use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Constant,
    Correlated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub name: String,
    pub reason: DropReason,
    /// Column it was correlated with; `None` for constant columns.
    pub partner: Option<String>,
    /// Signed Pearson correlation with `partner` on the training rows.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub threshold: f64,
    pub train_rows: usize,
    pub kept: Vec<String>,
    /// In the order the columns were removed.
    pub dropped: Vec<DroppedFeature>,
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn is_constant(col: &[f64]) -> bool {
    col.iter().all(|&v| v == col[0])
}

/// Largest |rho| over all column pairs on `rows`, ignoring constant columns.
pub fn max_abs_correlation(frame: &FeatureFrame, rows: Range<usize>) -> Result<f64, FeatureError> {
    frame.check_rows(&rows)?;
    let cols: Vec<Vec<f64>> = (0..frame.n_cols())
        .map(|j| frame.column_range(j, rows.clone()))
        .collect();
    let mut best = 0.0f64;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            if let Some(r) = pearson(&cols[i], &cols[j]) {
                best = best.max(r.abs());
            }
        }
    }
    Ok(best)
}

/// Removes columns until no pair on the training rows has |rho| > threshold.
///
/// Constant columns go first. Then, repeatedly, the pair with the largest
/// |rho| is found (earliest pair on ties) and the member with the larger
/// mean |rho| to the other kept columns is dropped; an exact tie drops the
/// later column. The returned frame keeps every row.
pub fn prune_correlated(
    frame: &FeatureFrame,
    threshold: f64,
    train_rows: Range<usize>,
) -> Result<(FeatureFrame, PruneReport), FeatureError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(FeatureError::Threshold(threshold));
    }
    frame.check_rows(&train_rows)?;
    if train_rows.len() < 2 {
        return Err(FeatureError::TooFewRows {
            needed: 2,
            got: train_rows.len(),
        });
    }

    let names = frame.names();
    let mut dropped = Vec::new();
    let mut alive: Vec<usize> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(frame.n_cols());
    for j in 0..frame.n_cols() {
        let col = frame.column_range(j, train_rows.clone());
        if is_constant(&col) {
            dropped.push(DroppedFeature {
                name: names[j].clone(),
                reason: DropReason::Constant,
                partner: None,
                correlation: None,
            });
        } else {
            alive.push(j);
        }
        cols.push(col);
    }

    let p = frame.n_cols();
    let mut rho = vec![0.0; p * p];
    for (a, &i) in alive.iter().enumerate() {
        for &j in &alive[a + 1..] {
            // Non-constant columns always have a defined correlation.
            let r = pearson(&cols[i], &cols[j]).unwrap_or(0.0);
            rho[i * p + j] = r;
            rho[j * p + i] = r;
        }
    }

    loop {
        let mut worst: Option<(usize, usize, f64)> = None;
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                let r = rho[i * p + j].abs();
                if r > threshold && worst.is_none_or(|(_, _, w)| r > w) {
                    worst = Some((i, j, r));
                }
            }
        }
        let Some((i, j, _)) = worst else { break };
        let mean_abs = |c: usize| {
            let others = alive.iter().filter(|&&k| k != c);
            others.clone().map(|&k| rho[c * p + k].abs()).sum::<f64>() / others.count() as f64
        };
        let (drop, keep) = if mean_abs(i) > mean_abs(j) { (i, j) } else { (j, i) };
        dropped.push(DroppedFeature {
            name: names[drop].clone(),
            reason: DropReason::Correlated,
            partner: Some(names[keep].clone()),
            correlation: Some(rho[drop * p + keep]),
        });
        alive.retain(|&k| k != drop);
    }

    let report = PruneReport {
        threshold,
        train_rows: train_rows.len(),
        kept: alive.iter().map(|&j| names[j].clone()).collect(),
        dropped,
    };
    Ok((frame.select_columns(&alive), report))
}
