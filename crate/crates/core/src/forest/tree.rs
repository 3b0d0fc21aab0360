use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::{ForestError, HyperParams};
use crate::rng::SplitMix64;

/// Row-major training matrix with 0/1 labels.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    x: &'a [f64],
    n_cols: usize,
    labels: &'a [u8],
}

impl<'a> Dataset<'a> {
    pub fn new(x: &'a [f64], n_cols: usize, labels: &'a [u8]) -> Result<Self, ForestError> {
        if n_cols == 0 || x.len() != n_cols * labels.len() {
            return Err(ForestError::Shape {
                values: x.len(),
                cols: n_cols,
                rows: labels.len(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(ForestError::Label);
        }
        Ok(Self { x, n_cols, labels })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn labels(&self) -> &'a [u8] {
        self.labels
    }

    #[inline]
    fn value(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.n_cols + col]
    }
}

/// CART node. Rows with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: [u64; 2],
    },
}

impl TreeNode {
    pub fn leaf_for(&self, row: &[f64]) -> [u64; 2] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    /// Positive-class share of the leaf reached by `row`.
    pub fn proba(&self, row: &[f64]) -> f64 {
        let [n0, n1] = self.leaf_for(row);
        n1 as f64 / (n0 + n1) as f64
    }

    /// Class counts summed over all leaves below this node.
    pub fn counts(&self) -> [u64; 2] {
        match self {
            TreeNode::Leaf { counts } => *counts,
            TreeNode::Split { left, right, .. } => {
                let (l, r) = (left.counts(), right.counts());
                [l[0] + r[0], l[1] + r[1]]
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    fn from_value(v: &Value) -> Result<Self, String> {
        let obj = v.as_object().ok_or("tree node must be an object")?;
        if let Some(c) = obj.get("c") {
            let c = c.as_array().filter(|a| a.len() == 2).ok_or("`c` must be [n0, n1]")?;
            let n = |i: usize| c[i].as_u64().ok_or("leaf counts must be non-negative integers");
            let counts = [n(0)?, n(1)?];
            if counts[0] + counts[1] == 0 {
                return Err("leaf with no samples".into());
            }
            return Ok(TreeNode::Leaf { counts });
        }
        let feature = obj
            .get("f")
            .and_then(Value::as_u64)
            .ok_or("split needs integer `f`")? as usize;
        let threshold = obj
            .get("t")
            .and_then(Value::as_f64)
            .ok_or("split needs numeric `t`")?;
        let left = Self::from_value(obj.get("l").ok_or("split needs `l`")?)?;
        let right = Self::from_value(obj.get("r").ok_or("split needs `r`")?)?;
        Ok(TreeNode::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        })
    }
}

impl Serialize for TreeNode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TreeNode::Leaf { counts } => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("c", counts)?;
                m.end()
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let mut m = s.serialize_map(Some(4))?;
                m.serialize_entry("f", feature)?;
                m.serialize_entry("t", threshold)?;
                m.serialize_entry("l", left)?;
                m.serialize_entry("r", right)?;
                m.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for TreeNode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        TreeNode::from_value(&v).map_err(D::Error::custom)
    }
}

pub(crate) fn gini(n0: f64, n1: f64) -> f64 {
    let n = n0 + n1;
    if n == 0.0 {
        return 0.0;
    }
    1.0 - (n0 * n0 + n1 * n1) / (n * n)
}

/// Splits are accepted only when they beat the incumbent by more than this,
/// so near-equal gains resolve to the earlier (feature, threshold).
const GAIN_EPS: f64 = 1e-12;

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

pub(crate) struct Grower<'a> {
    data: Dataset<'a>,
    params: &'a HyperParams,
    k_features: usize,
    /// Weighted impurity decrease per feature, `n_node / n_root * gain`.
    pub(crate) importance: Vec<f64>,
    root_n: f64,
    scratch: Vec<(f64, u8)>,
}

impl<'a> Grower<'a> {
    pub(crate) fn new(data: Dataset<'a>, params: &'a HyperParams, root_n: usize) -> Self {
        Self {
            data,
            params,
            k_features: params.max_features.resolve(data.n_cols()),
            importance: vec![0.0; data.n_cols()],
            root_n: root_n as f64,
            scratch: Vec::new(),
        }
    }

    pub(crate) fn grow(&mut self, samples: &mut [usize], depth: usize, rng: &mut SplitMix64) -> TreeNode {
        let n1 = samples.iter().filter(|&&i| self.data.labels[i] == 1).count() as u64;
        let counts = [samples.len() as u64 - n1, n1];
        let n = samples.len();
        let p = self.params;
        if counts[0] == 0
            || counts[1] == 0
            || p.max_depth.is_some_and(|d| depth >= d)
            || n < p.min_samples_split
            || n < 2 * p.min_samples_leaf
        {
            return TreeNode::Leaf { counts };
        }
        let features = rng.sample_indices(self.data.n_cols(), self.k_features);
        let Some(best) = self.best_split(samples, counts, &features) else {
            return TreeNode::Leaf { counts };
        };
        self.importance[best.feature] += n as f64 / self.root_n * best.gain;

        // Stable partition keeps the sample order, and hence the result, independent of sort internals.
        let (mut left, mut right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.data.value(i, best.feature) <= best.threshold);
        let l = self.grow(&mut left, depth + 1, rng);
        let r = self.grow(&mut right, depth + 1, rng);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    fn best_split(&mut self, samples: &[usize], counts: [u64; 2], features: &[usize]) -> Option<Split> {
        let n = samples.len();
        let nf = n as f64;
        let parent = gini(counts[0] as f64, counts[1] as f64);
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<Split> = None;
        let mut best_gain = 0.0;
        for &f in features {
            self.scratch.clear();
            self.scratch
                .extend(samples.iter().map(|&i| (self.data.value(i, f), self.data.labels[i])));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let (mut l0, mut l1) = (0.0, 0.0);
            for i in 0..n - 1 {
                if self.scratch[i].1 == 1 {
                    l1 += 1.0;
                } else {
                    l0 += 1.0;
                }
                let (a, b) = (self.scratch[i].0, self.scratch[i + 1].0);
                let n_left = i + 1;
                if a == b || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let (r0, r1) = (counts[0] as f64 - l0, counts[1] as f64 - l1);
                let nl = n_left as f64;
                let child = (nl * gini(l0, l1) + (nf - nl) * gini(r0, r1)) / nf;
                let gain = parent - child;
                if gain > best_gain + GAIN_EPS {
                    best_gain = gain;
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(a, b),
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Midpoint of two consecutive distinct values, never rounded up to `b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

/// Grows one CART tree on `samples` (row indices, repeats allowed).
pub fn train_tree(
    data: &Dataset,
    samples: &[usize],
    params: &HyperParams,
    rng: &mut SplitMix64,
) -> Result<TreeNode, ForestError> {
    params.validate()?;
    if samples.is_empty() {
        return Err(ForestError::Empty);
    }
    if let Some(&bad) = samples.iter().find(|&&i| i >= data.n_rows()) {
        return Err(ForestError::SampleIndex(bad));
    }
    let mut grower = Grower::new(*data, params, samples.len());
    Ok(grower.grow(&mut samples.to_vec(), 0, rng))
}
