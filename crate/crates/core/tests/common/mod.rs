//! Independent oracles and synthetic data shared by the integration tests.
//! Nothing here calls into the crate's numeric code.
#![allow(dead_code)]

pub mod http;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sarf::features::FeatureFrame;

pub fn day(i: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 1).unwrap() + chrono::Days::new(i as u64)
}

pub fn frame_from_columns(names: &[&str], cols: &[Vec<f64>], labels: Option<Vec<u8>>) -> FeatureFrame {
    let n = cols[0].len();
    let rows = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    FeatureFrame::new(
        (0..n).map(day).collect(),
        names.iter().map(|s| s.to_string()).collect(),
        rows,
        labels,
    )
    .unwrap()
}

/// `n x p` standard normal features; label is 1 iff column `signal` > 0.
pub fn planted_frame(seed: u64, n: usize, p: usize, signal: usize) -> FeatureFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let labels = (0..n).map(|i| u8::from(cols[signal][i] > 0.0)).collect();
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    frame_from_columns(&refs, &cols, Some(labels))
}

/// Pairwise concordance: P(score_pos > score_neg) + 0.5 P(tie).
pub fn concordance_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

/// Cyclic Jacobi rotations on a symmetric matrix; eigenvalues descending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Column means and sample standard deviations.
pub fn col_stats(cols: &[Vec<f64>]) -> Vec<(f64, f64)> {
    cols.iter()
        .map(|c| {
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            let v = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
            (m, v.sqrt())
        })
        .collect()
}

/// Correlation matrix straight from the definition.
pub fn correlation_matrix(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let stats = col_stats(cols);
    let n = cols[0].len() as f64;
    let p = cols.len();
    let mut r = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let s: f64 = (0..cols[i].len())
                .map(|k| (cols[i][k] - stats[i].0) * (cols[j][k] - stats[j].0))
                .sum();
            r[i][j] = s / (n - 1.0) / (stats[i].1 * stats[j].1);
        }
    }
    r
}

/// OLS on standardized columns by forming the normal equations and
/// solving with partially pivoted Gaussian elimination.
pub fn ols_standardized(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let stats = col_stats(cols);
    let p = cols.len();
    let n = y.len();
    let ym = y.iter().sum::<f64>() / n as f64;
    let z: Vec<Vec<f64>> = cols
        .iter()
        .zip(&stats)
        .map(|(c, (m, s))| c.iter().map(|v| (v - m) / s).collect())
        .collect();
    let mut aug = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            aug[i][j] = (0..n).map(|k| z[i][k] * z[j][k]).sum();
        }
        aug[i][p] = (0..n).map(|k| z[i][k] * (y[k] - ym)).sum();
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, piv);
        for row in 0..p {
            if row != col {
                let f = aug[row][col] / aug[col][col];
                for k in col..=p {
                    aug[row][k] -= f * aug[col][k];
                }
            }
        }
    }
    (0..p).map(|i| aug[i][p] / aug[i][i]).collect()
}

/// Greedy pruning re-derived naively: every round recomputes all
/// correlations from raw data and scans every ordered pair.
pub fn naive_prune(names: &[&str], cols: &[Vec<f64>], threshold: f64) -> Vec<String> {
    let mut alive: Vec<usize> = (0..cols.len())
        .filter(|&j| cols[j].iter().any(|&v| v != cols[j][0]))
        .collect();
    loop {
        let sub: Vec<Vec<f64>> = alive.iter().map(|&j| cols[j].clone()).collect();
        let r = correlation_matrix(&sub);
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..alive.len() {
            for b in a + 1..alive.len() {
                let v = r[a][b].abs();
                if v > threshold && best.is_none_or(|(_, _, w)| v > w) {
                    best = Some((a, b, v));
                }
            }
        }
        let Some((a, b, _)) = best else { break };
        let mean = |x: usize| {
            (0..alive.len()).filter(|&k| k != x).map(|k| r[x][k].abs()).sum::<f64>()
                / (alive.len() - 1) as f64
        };
        let drop = if mean(a) > mean(b) { a } else { b };
        alive.remove(drop);
    }
    alive.iter().map(|&j| names[j].to_string()).collect()
}
