use std::cmp::Ordering;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{roc_auc, EvalError};
use crate::features::FeatureFrame;
use crate::forest::{train_forest_on, Dataset, HyperParams, MaxFeatures};
use crate::rng::SplitMix64;

/// `k` contiguous validation blocks in row order, sizes differing by at
/// most one with the larger blocks first. Each fold trains on the rest.
pub fn kfold_splits(n_rows: usize, k: usize) -> Result<Vec<(Vec<usize>, Vec<usize>)>, EvalError> {
    if k < 2 || n_rows < k {
        return Err(EvalError::Folds { rows: n_rows, folds: k });
    }
    let (base, extra) = (n_rows / k, n_rows % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        let block: Range<usize> = start..start + len;
        let train = (0..start).chain(block.end..n_rows).collect();
        folds.push((train, block.clone().collect()));
        start = block.end;
    }
    Ok(folds)
}

/// Ranges the search draws from, each uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub n_trees: (usize, usize),
    /// Finite depths `lo..=hi`, plus one extra outcome for unlimited.
    pub max_depth: (usize, usize),
    pub min_samples_split: (usize, usize),
    pub min_samples_leaf: (usize, usize),
    pub max_features: Vec<MaxFeatures>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_trees: (100, 800),
            max_depth: (3, 20),
            min_samples_split: (2, 20),
            min_samples_leaf: (1, 10),
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::Fraction(0.5)],
        }
    }
}

impl SearchSpace {
    /// Draw order: trees, depth, split, leaf, max_features.
    fn draw(&self, rng: &mut SplitMix64, forest_seed: u64) -> HyperParams {
        let range = |rng: &mut SplitMix64, (lo, hi): (usize, usize)| {
            rng.range_inclusive(lo as u64, hi as u64) as usize
        };
        let n_trees = range(rng, self.n_trees);
        let depth_outcomes = (self.max_depth.1 - self.max_depth.0 + 2) as u64;
        let d = rng.below(depth_outcomes) as usize;
        let max_depth = (d + 1 < depth_outcomes as usize).then_some(self.max_depth.0 + d);
        let min_samples_split = range(rng, self.min_samples_split);
        let min_samples_leaf = range(rng, self.min_samples_leaf);
        let max_features = self.max_features[rng.below(self.max_features.len() as u64) as usize];
        HyperParams {
            n_trees,
            max_depth,
            min_samples_split,
            min_samples_leaf,
            max_features,
            seed: forest_seed,
            bootstrap: true,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let ok = |(lo, hi): (usize, usize)| lo <= hi;
        let valid = ok(self.n_trees)
            && self.n_trees.0 >= 1
            && ok(self.max_depth)
            && self.max_depth.0 >= 1
            && ok(self.min_samples_split)
            && self.min_samples_split.0 >= 2
            && ok(self.min_samples_leaf)
            && self.min_samples_leaf.0 >= 1
            && !self.max_features.is_empty();
        if !valid {
            return Err(EvalError::Space("a range is empty or out of bounds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub n_trials: usize,
    pub folds: usize,
    /// Seeds the parameter draws.
    pub search_seed: u64,
    /// Forest seed shared by every trial, so trials differ only in parameters.
    pub forest_seed: u64,
    pub space: SearchSpace,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_trials: 50,
            folds: 3,
            search_seed: 42,
            forest_seed: 42,
            space: SearchSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: HyperParams,
    /// Validation AUC per fold; `None` where the fold had a single class.
    pub fold_aucs: Vec<Option<f64>>,
    /// Sum of the recorded fold AUCs in fold order divided by their count.
    pub mean_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub trials: Vec<Trial>,
    pub best_index: usize,
    pub best: HyperParams,
}

pub(crate) fn mean_of(aucs: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = aucs.iter().flatten().copied().collect();
    if present.is_empty() {
        return None;
    }
    Some(present.iter().sum::<f64>() / present.len() as f64)
}

/// Higher AUC first, then fewer trees, then shallower (unlimited is deepest),
/// then earlier trial.
fn rank(a: &Trial, b: &Trial) -> Ordering {
    let depth = |t: &Trial| t.params.max_depth.unwrap_or(usize::MAX);
    b.mean_auc
        .total_cmp(&a.mean_auc)
        .then(a.params.n_trees.cmp(&b.params.n_trees))
        .then(depth(a).cmp(&depth(b)))
        .then(a.index.cmp(&b.index))
}

/// Random search over `config.space`, scoring each draw by mean AUC over
/// blocked folds of `train`. Only the rows of `train` are read.
pub fn random_search(train: &FeatureFrame, config: &SearchConfig) -> Result<SearchResult, EvalError> {
    if config.n_trials == 0 {
        return Err(EvalError::NoTrials);
    }
    config.space.validate()?;
    let labels = train.labels().ok_or(EvalError::MissingLabels)?;
    if train.n_rows() == 0 {
        return Err(EvalError::Empty);
    }
    let folds = kfold_splits(train.n_rows(), config.folds)?;
    let values: Vec<f64> = train.rows().flatten().copied().collect();
    let data = Dataset::new(&values, train.n_cols(), labels)?;

    let mut rng = SplitMix64::new(config.search_seed);
    let mut trials = Vec::with_capacity(config.n_trials);
    for index in 0..config.n_trials {
        let params = config.space.draw(&mut rng, config.forest_seed);
        let mut fold_aucs = Vec::with_capacity(folds.len());
        for (fit_rows, val_rows) in &folds {
            let val_labels: Vec<u8> = val_rows.iter().map(|&i| labels[i]).collect();
            if val_labels.iter().all(|&l| l == val_labels[0]) {
                fold_aucs.push(None);
                continue;
            }
            let model = train_forest_on(&data, fit_rows, train.names(), &params)?;
            let scores = val_rows
                .iter()
                .map(|&i| model.predict_proba_row(train.row(i)))
                .collect::<Result<Vec<f64>, _>>()?;
            fold_aucs.push(Some(roc_auc(&scores, &val_labels)?.1));
        }
        let mean_auc = mean_of(&fold_aucs).ok_or(EvalError::AllFoldsSkipped(index))?;
        trials.push(Trial {
            index,
            params,
            fold_aucs,
            mean_auc,
        });
    }
    let best = trials.iter().min_by(|a, b| rank(a, b)).expect("at least one trial");
    Ok(SearchResult {
        best_index: best.index,
        best: best.params.clone(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_blocks() {
        let f = kfold_splits(9, 3).unwrap();
        assert_eq!(f[0].1, [0, 1, 2]);
        assert_eq!(f[1].1, [3, 4, 5]);
        assert_eq!(f[2].1, [6, 7, 8]);
        assert_eq!(f[1].0, [0, 1, 2, 6, 7, 8]);
        let sizes: Vec<usize> = kfold_splits(10, 3).unwrap().iter().map(|f| f.1.len()).collect();
        assert_eq!(sizes, [4, 3, 3]);
        assert!(kfold_splits(2, 3).is_err());
        assert!(kfold_splits(5, 1).is_err());
    }

    #[test]
    fn draws_stay_in_space() {
        let space = SearchSpace::default();
        let mut rng = SplitMix64::new(5);
        let mut saw_unlimited = false;
        for _ in 0..500 {
            let p = space.draw(&mut rng, 1);
            assert!((100..=800).contains(&p.n_trees));
            match p.max_depth {
                Some(d) => assert!((3..=20).contains(&d)),
                None => saw_unlimited = true,
            }
            assert!((2..=20).contains(&p.min_samples_split));
            assert!((1..=10).contains(&p.min_samples_leaf));
            p.validate().unwrap();
        }
        assert!(saw_unlimited);
    }

    fn trial(index: usize, auc: f64, trees: usize, depth: Option<usize>) -> Trial {
        Trial {
            index,
            params: HyperParams {
                n_trees: trees,
                max_depth: depth,
                ..HyperParams::default()
            },
            fold_aucs: vec![Some(auc)],
            mean_auc: auc,
        }
    }

    #[test]
    fn tie_rule() {
        let mut ts = [
            trial(0, 0.7, 300, Some(5)),
            trial(1, 0.8, 500, None),
            trial(2, 0.8, 200, None),
            trial(3, 0.8, 200, Some(9)),
            trial(4, 0.8, 200, Some(9)),
        ];
        ts.sort_by(rank);
        let order: Vec<usize> = ts.iter().map(|t| t.index).collect();
        assert_eq!(order, [3, 4, 2, 1, 0]);
    }

    #[test]
    fn skipped_folds_are_excluded() {
        assert_eq!(mean_of(&[Some(0.5), None, Some(0.75)]), Some(0.625));
        assert_eq!(mean_of(&[None, None]), None);
    }
}
