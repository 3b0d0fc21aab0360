use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureFrame};

/// Per-column mean and sample standard deviation (n - 1) over `rows`.
pub fn standardize_stats(
    frame: &FeatureFrame,
    rows: Range<usize>,
) -> Result<(Vec<f64>, Vec<f64>), FeatureError> {
    frame.check_rows(&rows)?;
    if rows.len() < 2 {
        return Err(FeatureError::TooFewRows {
            needed: 2,
            got: rows.len(),
        });
    }
    let n = rows.len() as f64;
    let mut means = Vec::with_capacity(frame.n_cols());
    let mut scales = Vec::with_capacity(frame.n_cols());
    for j in 0..frame.n_cols() {
        let col = frame.column_range(j, rows.clone());
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if sd == 0.0 || col.iter().all(|&v| v == col[0]) {
            return Err(FeatureError::ConstantColumn(frame.names()[j].clone()));
        }
        means.push(mean);
        scales.push(sd);
    }
    Ok((means, scales))
}

fn standardized(frame: &FeatureFrame, rows: Range<usize>, means: &[f64], scales: &[f64]) -> DMatrix<f64> {
    let p = frame.n_cols();
    let n = rows.len();
    DMatrix::from_fn(n, p, |i, j| (frame.row(rows.start + i)[j] - means[j]) / scales[j])
}

/// Principal axes of the standardized training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub input_names: Vec<String>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Retained unit-length axes, by decreasing eigenvalue. The largest
    /// magnitude loading of each axis is positive.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the correlation matrix, all of them, descending.
    pub eigenvalues: Vec<f64>,
    /// Share of total variance per retained component.
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaTransform {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component_names(&self) -> Vec<String> {
        (1..=self.n_components()).map(|k| format!("pc{k}")).collect()
    }

    /// Scores for one raw input row.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = row
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        self.components
            .iter()
            .map(|c| c.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Standardized row rebuilt from its scores.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.input_names.len()];
        for (c, s) in self.components.iter().zip(scores) {
            for (zi, ci) in z.iter_mut().zip(c) {
                *zi += s * ci;
            }
        }
        z
    }
}

/// Fits PCA on `train_rows`, keeping the fewest components whose cumulative
/// explained variance reaches `variance_target`; `1.0` keeps them all.
pub fn fit_pca(
    frame: &FeatureFrame,
    train_rows: Range<usize>,
    variance_target: f64,
) -> Result<PcaTransform, FeatureError> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(FeatureError::VarianceTarget(variance_target));
    }
    let (means, scales) = standardize_stats(frame, train_rows.clone())?;
    let n = train_rows.len();
    let z = standardized(frame, train_rows, &means, &scales);
    let cov = (z.transpose() * &z) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();

    let mut components = Vec::new();
    let mut ratios = Vec::new();
    let mut cumulative = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        let mut axis: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = axis
            .iter()
            .copied()
            .reduce(|a, b| if b.abs() > a.abs() { b } else { a })
            .unwrap_or(1.0);
        if pivot < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(axis);
        let ratio = eigenvalues[rank] / total;
        ratios.push(ratio);
        cumulative += ratio;
        // A target of exactly 1 keeps every axis, including null directions.
        if variance_target < 1.0 && cumulative >= variance_target - 1e-12 {
            break;
        }
    }
    Ok(PcaTransform {
        input_names: frame.names().to_vec(),
        means,
        scales,
        components,
        eigenvalues,
        explained_variance_ratio: ratios,
    })
}

/// Replaces the columns of `frame` by principal-component scores `pc1..pck`.
pub fn apply_pca(pca: &PcaTransform, frame: &FeatureFrame) -> Result<FeatureFrame, FeatureError> {
    frame.check_schema(&pca.input_names)?;
    let rows = frame.rows().map(|r| pca.project(r)).collect();
    FeatureFrame::new(
        frame.dates().to_vec(),
        pca.component_names(),
        rows,
        frame.labels().map(<[u8]>::to_vec),
    )
}

/// Ridge coefficients on standardized columns, reported for inspection only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeDiagnostic {
    pub lambda: f64,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Solves `(Z'Z + lambda I) b = Z'(y - mean(y))` with `Z` the standardized
/// training columns and `y` the 0/1 labels. The intercept is `mean(y)`.
pub fn ridge_fit(
    frame: &FeatureFrame,
    train_rows: Range<usize>,
    lambda: f64,
) -> Result<RidgeDiagnostic, FeatureError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(FeatureError::Lambda(lambda));
    }
    let labels = frame.labels().ok_or(FeatureError::MissingLabels)?;
    let (means, scales) = standardize_stats(frame, train_rows.clone())?;
    let y: Vec<f64> = labels[train_rows.clone()].iter().map(|&l| l as f64).collect();
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let z = standardized(frame, train_rows, &means, &scales);
    let p = frame.n_cols();
    let gram = z.transpose() * &z + DMatrix::identity(p, p) * lambda;
    let rhs = z.transpose() * DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));

    let eig = SymmetricEigen::new(gram.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    if p > 0 && !(lo > 1e-10 * hi) {
        return Err(FeatureError::Singular(lambda));
    }
    let beta = gram
        .cholesky()
        .ok_or(FeatureError::Singular(lambda))?
        .solve(&rhs);
    Ok(RidgeDiagnostic {
        lambda,
        names: frame.names().to_vec(),
        coefficients: beta.iter().copied().collect(),
        intercept: y_mean,
        means,
        scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn frame(rows: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> FeatureFrame {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let dates = (0..rows.len()).map(|i| start + chrono::Days::new(i as u64)).collect();
        let names = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
        FeatureFrame::new(dates, names, rows, labels).unwrap()
    }

    #[test]
    fn rank_one_needs_one_component() {
        let rows = (0..20).map(|i| vec![i as f64, 3.0 * i as f64 - 2.0]).collect();
        let pca = fit_pca(&frame(rows, None), 0..20, 0.95).unwrap();
        assert_eq!(pca.n_components(), 1);
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pca.components[0][0] - s).abs() < 1e-12);
        assert!((pca.components[0][1] - s).abs() < 1e-12);
    }

    #[test]
    fn full_rank_reconstructs() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (0.7 * t).cos() + 0.1 * t, (t * t) % 7.0]
            })
            .collect();
        let f = frame(rows, None);
        let pca = fit_pca(&f, 0..30, 1.0).unwrap();
        assert_eq!(pca.n_components(), 3);
        for row in f.rows() {
            let z = pca.reconstruct(&pca.project(row));
            for j in 0..3 {
                let want = (row[j] - pca.means[j]) / pca.scales[j];
                assert!((z[j] - want).abs() < 1e-8);
            }
        }
        let out = apply_pca(&pca, &f).unwrap();
        assert_eq!(out.names(), ["pc1", "pc2", "pc3"]);
    }

    #[test]
    fn ridge_limits() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, ((i * 7) % 11) as f64]).collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let f = frame(rows, Some(labels));
        let big = ridge_fit(&f, 0..40, 1e12).unwrap();
        assert!(big.coefficients.iter().all(|b| b.abs() < 1e-6));
        assert_eq!(big.intercept, 0.5);
        assert!(ridge_fit(&f, 0..40, 0.0).is_ok());
        assert_eq!(ridge_fit(&f, 0..40, -1.0).unwrap_err(), FeatureError::Lambda(-1.0));

        let dup: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let f = frame(dup, Some(vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]));
        assert_eq!(ridge_fit(&f, 0..10, 0.0).unwrap_err(), FeatureError::Singular(0.0));
        assert!(ridge_fit(&f, 0..10, 1.0).is_ok());
    }

    #[test]
    fn constant_column_rejected() {
        let rows = (0..5).map(|i| vec![i as f64, 1.0]).collect();
        assert_eq!(
            fit_pca(&frame(rows, None), 0..5, 0.9).unwrap_err(),
            FeatureError::ConstantColumn("f1".into())
        );
    }
}
