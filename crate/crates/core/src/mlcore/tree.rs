//! Greedy regression and classification trees over histogram-binned features.
//!
//! Classification trees fit 0/1 targets with the same squared-error criterion:
//! for binary labels the Gini impurity of a node is exactly twice its
//! variance, so both criteria rank every candidate split identically. Leaves
//! hold the mean target, i.e. the positive-class probability.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::dataset::{DesignMatrix, FeatureKind, Task};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const MAX_BINS: usize = 255;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub task: Task,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 16, min_leaf: 5, task: Task::Regression }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// Left when `x <= threshold`.
    LessEq(f64),
    /// Left when `x` is one of the listed category codes (ascending).
    InSet(Vec<f64>),
}

impl SplitRule {
    pub fn goes_left(&self, x: f64) -> bool {
        match self {
            SplitRule::LessEq(t) => x <= *t,
            SplitRule::InSet(set) => set.binary_search_by(|v| v.total_cmp(&x)).is_ok(),
        }
    }
}

/// Training-row statistics of a node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub count: usize,
    pub sum: f64,
    /// Sum of squared deviations from the node mean.
    pub sse: f64,
}

impl NodeStats {
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub value: f64,
    /// Dense index in depth-first, left-first order.
    pub index: usize,
    pub stats: NodeStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub rule: SplitRule,
    pub stats: NodeStats,
    pub left: TreeNode,
    pub right: TreeNode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf(Leaf),
    Split(Box<Split>),
}

impl TreeNode {
    pub fn stats(&self) -> &NodeStats {
        match self {
            TreeNode::Leaf(l) => &l.stats,
            TreeNode::Split(s) => &s.stats,
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Split(s) => s.left.n_leaves() + s.right.n_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split(s) => 1 + s.left.depth().max(s.right.depth()),
        }
    }

    pub fn leaf_for(&self, row: &[f64]) -> &Leaf {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(l) => return l,
                TreeNode::Split(s) => node = if s.rule.goes_left(row[s.feature]) { &s.left } else { &s.right },
            }
        }
    }

    /// Renumbers leaves densely in depth-first, left-first order.
    pub fn reindex(&mut self) -> usize {
        fn walk(node: &mut TreeNode, next: &mut usize) {
            match node {
                TreeNode::Leaf(l) => {
                    l.index = *next;
                    *next += 1;
                }
                TreeNode::Split(s) => {
                    walk(&mut s.left, next);
                    walk(&mut s.right, next);
                }
            }
        }
        let mut next = 0;
        walk(self, &mut next);
        next
    }

    pub fn leaves(&self) -> Vec<&Leaf> {
        fn walk<'a>(node: &'a TreeNode, out: &mut Vec<&'a Leaf>) {
            match node {
                TreeNode::Leaf(l) => out.push(l),
                TreeNode::Split(s) => {
                    walk(&s.left, out);
                    walk(&s.right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: TreeNode,
    pub n_leaves: usize,
    pub n_features: usize,
    pub params: TreeParams,
}

impl Tree {
    pub fn new(mut root: TreeNode, n_features: usize, params: TreeParams) -> Self {
        let n_leaves = root.reindex();
        Tree { root, n_leaves, n_features, params }
    }

    pub fn leaf_for(&self, row: &[f64]) -> &Leaf {
        self.root.leaf_for(row)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.leaf_for(row).value
    }

    pub fn predict(&self, data: &DesignMatrix) -> Result<Vec<f64>> {
        data.check_width(self.n_features)?;
        Ok((0..data.n_rows()).map(|i| self.predict_row(data.row(i))).collect())
    }

    /// Majority class of the reached leaf (ties to the positive class).
    pub fn predict_class(&self, row: &[f64]) -> u8 {
        u8::from(self.predict_row(row) >= 0.5)
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// Per-feature bin boundaries learned from training values.
#[derive(Clone, Debug)]
pub(crate) struct FeatureBins {
    kind: FeatureKind,
    /// Numeric: smallest and largest training value in each bin. Categorical:
    /// the category code of each bin in both.
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl FeatureBins {
    fn n_bins(&self) -> usize {
        self.lo.len()
    }

    fn threshold_after(&self, b: usize) -> f64 {
        let mid = 0.5 * (self.hi[b] + self.lo[b + 1]);
        if mid >= self.lo[b + 1] || mid < self.hi[b] {
            self.hi[b]
        } else {
            mid
        }
    }
}

/// Column-major bin codes of a design matrix.
#[derive(Clone, Debug)]
pub(crate) struct Binned {
    codes: Vec<Vec<u8>>,
    bins: Vec<FeatureBins>,
}

impl Binned {
    pub(crate) fn new(data: &DesignMatrix) -> Result<Self> {
        let n = data.n_rows();
        let mut codes = Vec::with_capacity(data.n_cols());
        let mut bins = Vec::with_capacity(data.n_cols());
        for (j, &kind) in data.kinds().iter().enumerate() {
            let column: Vec<f64> = (0..n).map(|i| data.get(i, j)).collect();
            let mut sorted = column.clone();
            sorted.sort_by(f64::total_cmp);
            let mut edges: Vec<f64> = match kind {
                FeatureKind::Categorical => {
                    let mut distinct = sorted.clone();
                    distinct.dedup();
                    if distinct.len() > MAX_BINS {
                        return Err(Error::InvalidParams(format!(
                            "categorical feature `{}` has {} levels (at most {MAX_BINS})",
                            data.names()[j],
                            distinct.len()
                        )));
                    }
                    distinct
                }
                FeatureKind::Numeric => {
                    let mut distinct = sorted.clone();
                    distinct.dedup();
                    if distinct.len() <= MAX_BINS {
                        distinct
                    } else {
                        let mut e: Vec<f64> =
                            (1..=MAX_BINS).map(|k| sorted[(k * n / MAX_BINS).max(1) - 1]).collect();
                        e.dedup();
                        if e.last() != sorted.last() {
                            e.push(*sorted.last().expect("non-empty column"));
                        }
                        e
                    }
                }
            };
            if edges.is_empty() {
                edges.push(0.0);
            }
            let mut lo = vec![f64::INFINITY; edges.len()];
            let mut hi = vec![f64::NEG_INFINITY; edges.len()];
            let code: Vec<u8> = column
                .iter()
                .map(|&x| {
                    let b = edges.partition_point(|&e| e < x);
                    lo[b] = lo[b].min(x);
                    hi[b] = hi[b].max(x);
                    b as u8
                })
                .collect();
            if kind == FeatureKind::Categorical {
                lo.clone_from(&edges);
                hi = edges;
            }
            codes.push(code);
            bins.push(FeatureBins { kind, lo, hi });
        }
        Ok(Binned { codes, bins })
    }

    pub(crate) fn n_features(&self) -> usize {
        self.bins.len()
    }
}

/// Growth options beyond [`TreeParams`]: per-split feature subsampling.
pub(crate) struct Grower<'a> {
    pub(crate) binned: &'a Binned,
    pub(crate) target: &'a [f64],
    pub(crate) params: TreeParams,
    pub(crate) max_features: Option<usize>,
    pub(crate) rng: Option<&'a mut Rng>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    rule: SplitRule,
    /// Left membership per bin of `feature`.
    left_bins: Vec<bool>,
}

impl Grower<'_> {
    /// Grows a subtree over `rows` (repeats allowed for bootstrap samples).
    pub(crate) fn grow(&mut self, rows: &mut [u32]) -> TreeNode {
        let mut root = self.grow_node(rows, 0);
        root.reindex();
        root
    }

    fn stats(&self, rows: &[u32]) -> (NodeStats, bool) {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.target[r as usize]).sum();
        let mean = if n == 0 { 0.0 } else { sum / n as f64 };
        let mut sse = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows {
            let y = self.target[r as usize];
            sse += (y - mean) * (y - mean);
            lo = lo.min(y);
            hi = hi.max(y);
        }
        (NodeStats { count: n, sum, sse }, lo == hi)
    }

    fn grow_node(&mut self, rows: &mut [u32], depth: usize) -> TreeNode {
        let (stats, pure) = self.stats(rows);
        let leaf = TreeNode::Leaf(Leaf { value: stats.mean(), index: 0, stats });
        if pure || depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf.max(1) {
            return leaf;
        }
        let Some(best) = self.best_split(rows, &stats) else {
            return leaf;
        };
        let codes = &self.binned.codes[best.feature];
        let mut split_at = 0;
        for k in 0..rows.len() {
            if best.left_bins[codes[rows[k] as usize] as usize] {
                rows.swap(k, split_at);
                split_at += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(split_at);
        let left = self.grow_node(left_rows, depth + 1);
        let right = self.grow_node(right_rows, depth + 1);
        TreeNode::Split(Box::new(Split { feature: best.feature, rule: best.rule, stats, left, right }))
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.binned.n_features();
        match (self.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = index::sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[u32], stats: &NodeStats) -> Option<Candidate> {
        let min_leaf = self.params.min_leaf.max(1) as f64;
        let n = stats.count as f64;
        let parent = stats.sum * stats.sum / n;
        let mut best: Option<Candidate> = None;
        let mut count = [0f64; 256];
        let mut sum = [0f64; 256];
        for f in self.candidate_features() {
            let bins = &self.binned.bins[f];
            let nb = bins.n_bins();
            let codes = &self.binned.codes[f];
            count[..nb].iter_mut().for_each(|c| *c = 0.0);
            sum[..nb].iter_mut().for_each(|s| *s = 0.0);
            for &r in rows {
                let b = codes[r as usize] as usize;
                count[b] += 1.0;
                sum[b] += self.target[r as usize];
            }
            // Bins in scan order: ascending codes, or ascending mean for categories.
            let mut order: Vec<usize> = (0..nb).filter(|&b| count[b] > 0.0).collect();
            if order.len() < 2 {
                continue;
            }
            if bins.kind == FeatureKind::Categorical {
                order.sort_by(|&a, &b| (sum[a] / count[a]).total_cmp(&(sum[b] / count[b])).then(a.cmp(&b)));
            }
            let (mut nl, mut sl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let b = order[k];
                nl += count[b];
                sl += sum[b];
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let sr = stats.sum - sl;
                let gain = sl * sl / nl + sr * sr / nr - parent;
                if best.as_ref().is_some_and(|c| gain <= c.gain) {
                    continue;
                }
                let mut left_bins = vec![false; nb];
                order[..=k].iter().for_each(|&b| left_bins[b] = true);
                let rule = match bins.kind {
                    FeatureKind::Numeric => SplitRule::LessEq(bins.threshold_after(b)),
                    FeatureKind::Categorical => {
                        let mut set: Vec<f64> = order[..=k].iter().map(|&b| bins.lo[b]).collect();
                        set.sort_by(f64::total_cmp);
                        SplitRule::InSet(set)
                    }
                };
                best = Some(Candidate { gain, feature: f, rule, left_bins });
            }
        }
        best
    }
}

pub(crate) fn check_tree_params(params: &TreeParams, data: &DesignMatrix) -> Result<()> {
    if data.n_rows() == 0 {
        return Err(Error::InsufficientData(String::from("cannot fit a tree on zero rows")));
    }
    if data.n_rows() < params.min_leaf {
        return Err(Error::InsufficientData(format!("{} rows is below min_leaf {}", data.n_rows(), params.min_leaf)));
    }
    if params.task == Task::Classification {
        data.require_binary()?;
    }
    Ok(())
}

pub fn fit_tree(data: &DesignMatrix, params: &TreeParams) -> Result<Tree> {
    check_tree_params(params, data)?;
    let binned = Binned::new(data)?;
    let mut rows: Vec<u32> = (0..data.n_rows() as u32).collect();
    let root = Grower { binned: &binned, target: data.target(), params: *params, max_features: None, rng: None }
        .grow(&mut rows);
    Ok(Tree::new(root, data.n_cols(), *params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlcore::dataset::FeatureKind;

    fn numeric(rows: &[Vec<f64>], y: &[f64]) -> DesignMatrix {
        DesignMatrix::from_rows(rows, y.to_vec()).unwrap()
    }

    #[test]
    fn constant_targets_make_one_leaf() {
        let d = numeric(&[vec![1.0], vec![2.0], vec![3.0]], &[0.4, 0.4, 0.4]);
        let t = fit_tree(&d, &TreeParams { max_depth: 5, min_leaf: 1, task: Task::Regression }).unwrap();
        assert_eq!(t.n_leaves, 1);
        assert!((t.predict_row(&[9.0]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn depth_zero_is_the_mean_and_majority() {
        let d = numeric(&[vec![1.0], vec![2.0], vec![3.0]], &[1.0, 1.0, 0.0]);
        let t = fit_tree(&d, &TreeParams { max_depth: 0, min_leaf: 1, task: Task::Classification }).unwrap();
        assert_eq!(t.n_leaves, 1);
        assert!((t.predict_row(&[0.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.predict_class(&[0.0]), 1);
    }

    #[test]
    fn xor_is_learned_at_depth_two() {
        let rows = [vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let d = numeric(&rows, &[0.0, 1.0, 1.0, 0.0]);
        let t = fit_tree(&d, &TreeParams { max_depth: 2, min_leaf: 1, task: Task::Classification }).unwrap();
        for (r, y) in rows.iter().zip([0u8, 1, 1, 0]) {
            assert_eq!(t.predict_class(r), y);
        }
        assert_eq!(t.n_leaves, 4);
    }

    #[test]
    fn ties_go_to_the_lowest_feature_and_threshold() {
        // Both features separate the targets identically.
        let d = numeric(&[vec![0.0, 0.0], vec![1.0, 1.0]], &[0.0, 1.0]);
        let t = fit_tree(&d, &TreeParams { max_depth: 1, min_leaf: 1, task: Task::Regression }).unwrap();
        match &t.root {
            TreeNode::Split(s) => {
                assert_eq!(s.feature, 0);
                assert_eq!(s.rule, SplitRule::LessEq(0.5));
            }
            TreeNode::Leaf(_) => panic!("expected a split"),
        }
    }

    #[test]
    fn categorical_split_groups_levels_by_mean() {
        let values = vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0];
        let d = DesignMatrix::new(
            values,
            vec![FeatureKind::Categorical],
            vec![String::from("city")],
            vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0],
        )
        .unwrap();
        let t = fit_tree(&d, &TreeParams { max_depth: 1, min_leaf: 1, task: Task::Regression }).unwrap();
        match &t.root {
            TreeNode::Split(s) => assert_eq!(s.rule, SplitRule::InSet(vec![1.0])),
            TreeNode::Leaf(_) => panic!("expected a split"),
        }
        assert_eq!(t.predict_row(&[2.0]), 1.0);
        assert_eq!(t.predict_row(&[1.0]), 0.0);
    }

    #[test]
    fn many_distinct_values_are_binned() {
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![f64::from(i) * 0.001]).collect();
        let y: Vec<f64> = (0..1000).map(|i| f64::from(u8::from(i >= 500))).collect();
        let d = numeric(&rows, &y);
        let t = fit_tree(&d, &TreeParams { max_depth: 1, min_leaf: 1, task: Task::Regression }).unwrap();
        let wrong = rows.iter().zip(&y).filter(|(r, y)| (t.predict_row(r) - **y).abs() > 0.5).count();
        assert!(wrong <= 4, "{wrong} rows misplaced");
    }

    #[test]
    fn leaf_indices_are_dense_depth_first() {
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![f64::from(i)]).collect();
        let y: Vec<f64> = (0..16).map(f64::from).collect();
        let t = fit_tree(&numeric(&rows, &y), &TreeParams { max_depth: 3, min_leaf: 1, task: Task::Regression }).unwrap();
        let idx: Vec<usize> = t.root.leaves().iter().map(|l| l.index).collect();
        assert_eq!(idx, (0..t.n_leaves).collect::<Vec<_>>());
        assert_eq!(t.n_leaves, 8);
    }

    #[test]
    fn rejects_empty_and_non_binary_classification() {
        let d = numeric(&[], &[]);
        assert!(fit_tree(&d, &TreeParams::default()).is_err());
        let d = numeric(&[vec![1.0]], &[0.5]);
        assert!(fit_tree(&d, &TreeParams { task: Task::Classification, min_leaf: 1, ..Default::default() }).is_err());
    }
}
