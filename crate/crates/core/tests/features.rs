mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sarf::features::{
    apply_pca, fit_pca, max_abs_correlation, prune_correlated, ridge_fit, train_size, DropReason,
    FeatureError, FeatureFrame,
};

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// a, a + small noise, b, b + more noise, a noisy a/b blend, independent c.
fn planted_correlation(seed: u64, n: usize) -> (Vec<&'static str>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = noise(&mut rng, n);
    let b = noise(&mut rng, n);
    let c = noise(&mut rng, n);
    let e1 = noise(&mut rng, n);
    let e2 = noise(&mut rng, n);
    let e3 = noise(&mut rng, n);
    let a2: Vec<f64> = a.iter().zip(&e1).map(|(x, e)| x + 0.2 * e).collect();
    let b2: Vec<f64> = b.iter().zip(&e2).map(|(x, e)| 0.9 * x + 0.4 * e + 0.3 * a[0]).collect();
    let mix: Vec<f64> = (0..n).map(|i| 0.7 * a[i] + 0.7 * b[i] + 0.1 * e3[i]).collect();
    (vec!["a", "a2", "b", "b2", "mix", "c"], vec![a, a2, b, b2, mix, c])
}

#[test]
fn prune_matches_naive_greedy() {
    for seed in 0..20 {
        let (names, cols) = planted_correlation(seed, 200);
        let frame = frame_from_columns(&names, &cols, None);
        for threshold in [0.5, 0.65, 0.8, 0.95] {
            let (out, report) = prune_correlated(&frame, threshold, 0..200).unwrap();
            assert_eq!(out.names(), naive_prune(&names, &cols, threshold), "seed {seed} t {threshold}");
            assert!(max_abs_correlation(&out, 0..200).unwrap() <= threshold);
            for d in &report.dropped {
                assert_eq!(d.reason, DropReason::Correlated);
                assert!(d.correlation.unwrap().abs() > threshold);
            }
            assert_eq!(report.kept.len() + report.dropped.len(), names.len());
        }
    }
}

#[test]
fn prune_reads_training_rows_only() {
    let (names, cols) = planted_correlation(3, 300);
    let frame = frame_from_columns(&names, &cols, None);
    let (_, before) = prune_correlated(&frame, 0.8, 0..200).unwrap();
    let mut changed = cols.clone();
    for col in changed.iter_mut() {
        for v in &mut col[200..] {
            *v = -*v * 3.0 + 11.0;
        }
    }
    let frame2 = frame_from_columns(&names, &changed, None);
    let (_, after) = prune_correlated(&frame2, 0.8, 0..200).unwrap();
    assert_eq!(before, after);

    let pca1 = fit_pca(&frame, 0..200, 0.9).unwrap();
    let pca2 = fit_pca(&frame2, 0..200, 0.9).unwrap();
    assert_eq!(pca1, pca2);
}

#[test]
fn pca_ratios_match_jacobi() {
    for seed in 0..10 {
        let (names, cols) = planted_correlation(seed, 150);
        let frame = frame_from_columns(&names, &cols, None);
        let pca = fit_pca(&frame, 0..150, 1.0).unwrap();
        let oracle = jacobi_eigenvalues(&correlation_matrix(&cols));
        let total: f64 = oracle.iter().sum();
        assert_eq!(pca.n_components(), names.len());
        for (got, want) in pca.explained_variance_ratio.iter().zip(&oracle) {
            assert!((got - want / total).abs() < 1e-6, "{got} vs {}", want / total);
        }
        // the full basis reproduces every standardized row
        for row in frame.rows() {
            let z = pca.reconstruct(&pca.project(row));
            for j in 0..names.len() {
                let want = (row[j] - pca.means[j]) / pca.scales[j];
                assert!((z[j] - want).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn pca_keeps_fewest_components() {
    let (names, cols) = planted_correlation(1, 150);
    let frame = frame_from_columns(&names, &cols, None);
    let pca = fit_pca(&frame, 0..150, 0.8).unwrap();
    let cum: Vec<f64> = pca
        .explained_variance_ratio
        .iter()
        .scan(0.0, |s, r| {
            *s += r;
            Some(*s)
        })
        .collect();
    assert!(*cum.last().unwrap() >= 0.8);
    if cum.len() > 1 {
        assert!(cum[cum.len() - 2] < 0.8);
    }
    let out = apply_pca(&pca, &frame).unwrap();
    assert_eq!(out.n_cols(), pca.n_components());
    let wrong = frame.without_columns(&["c"]);
    assert!(matches!(apply_pca(&pca, &wrong), Err(FeatureError::Schema { .. })));
}

#[test]
fn ridge_at_zero_is_ols() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let cols: Vec<Vec<f64>> = (0..4).map(|_| noise(&mut rng, 120)).collect();
        let labels: Vec<u8> = (0..120)
            .map(|i| u8::from(cols[0][i] - 0.5 * cols[2][i] + 0.3 * rng.sample::<f64, _>(StandardNormal) > 0.0))
            .collect();
        let frame = frame_from_columns(&["p", "q", "r", "s"], &cols, Some(labels.clone()));
        let ridge = ridge_fit(&frame, 0..120, 0.0).unwrap();
        let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        let oracle = ols_standardized(&cols, &y);
        for (got, want) in ridge.coefficients.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        let shrunk = ridge_fit(&frame, 0..120, 50.0).unwrap();
        let norm = |b: &[f64]| b.iter().map(|v| v * v).sum::<f64>();
        assert!(norm(&shrunk.coefficients) < norm(&ridge.coefficients));
    }
}

#[test]
fn split_on_fixture_size() {
    assert_eq!(train_size(2062, 0.6667).unwrap(), 1375);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>(), n in 1usize..40, p in 1usize..6, labeled in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 10f64.powi(rng.random_range(-8..8))).collect())
            .collect();
        let labels = labeled.then(|| (0..n).map(|_| rng.random_range(0..2u8)).collect());
        let names: Vec<String> = (0..p).map(|j| format!("c{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let frame = frame_from_columns(&refs, &cols, labels);
        let back = FeatureFrame::from_csv(frame.to_csv().as_bytes()).unwrap();
        prop_assert_eq!(back, frame);
    }
}
