//! Cost-complexity (weakest-link) pruning with the penalty chosen by k-fold
//! cross-validation.
//!
//! A node's cost is its training SSE; for 0/1 targets that is half the Gini
//! cost, which scales every penalty by the same constant and leaves the
//! pruning sequence unchanged. Held-out loss is squared error (the Brier score
//! for classification).

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dataset::DesignMatrix;
use super::fold_assignment;
use super::tree::{Binned, Grower, Leaf, Split, Tree, TreeNode};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Preorder arena view of a tree.
struct Flat<'a> {
    nodes: Vec<&'a TreeNode>,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl<'a> Flat<'a> {
    fn new(root: &'a TreeNode) -> Self {
        let mut f = Flat { nodes: Vec::new(), left: Vec::new(), right: Vec::new() };
        f.push(root);
        f
    }

    fn push(&mut self, node: &'a TreeNode) -> usize {
        let id = self.nodes.len();
        self.nodes.push(node);
        self.left.push(NONE);
        self.right.push(NONE);
        if let TreeNode::Split(s) = node {
            let l = self.push(&s.left);
            let r = self.push(&s.right);
            self.left[id] = l;
            self.right[id] = r;
        }
        id
    }

    fn sse(&self, id: usize) -> f64 {
        self.nodes[id].stats().sse
    }

    /// For each node, the penalty at which it becomes a leaf of the pruned
    /// tree (`+inf` for original leaves, never for the root of a split-free
    /// tree), and the increasing breakpoint sequence.
    fn collapse_alphas(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.nodes.len();
        let mut collapse = vec![f64::INFINITY; n];
        let mut breakpoints = Vec::new();
        let mut r_sub = vec![0.0; n];
        let mut leaves = vec![0usize; n];
        let mut last = 0.0f64;
        while self.left[0] != NONE && collapse[0].is_infinite() {
            // Subtree costs in the current tree; children follow parents in preorder.
            for id in (0..n).rev() {
                if self.left[id] == NONE || collapse[id].is_finite() {
                    r_sub[id] = self.sse(id);
                    leaves[id] = 1;
                } else {
                    r_sub[id] = r_sub[self.left[id]] + r_sub[self.right[id]];
                    leaves[id] = leaves[self.left[id]] + leaves[self.right[id]];
                }
            }
            let g = |id: usize| ((self.sse(id) - r_sub[id]) / (leaves[id] - 1) as f64).max(0.0);
            let mut live = vec![false; n];
            live[0] = true;
            let mut alpha = f64::INFINITY;
            for id in 0..n {
                if live[id] && self.left[id] != NONE && collapse[id].is_infinite() {
                    alpha = alpha.min(g(id));
                    live[self.left[id]] = true;
                    live[self.right[id]] = true;
                }
            }
            let alpha = alpha.max(last);
            let cut = alpha + 1e-12 * alpha.max(f64::MIN_POSITIVE);
            let mut cleared = vec![false; n];
            for id in 0..n {
                if !live[id] || self.left[id] == NONE || collapse[id].is_finite() || cleared[id] {
                    continue;
                }
                if g(id) <= cut {
                    collapse[id] = alpha;
                    // Descendants vanish with it.
                    let mut stack = vec![self.left[id], self.right[id]];
                    while let Some(c) = stack.pop() {
                        cleared[c] = true;
                        if self.left[c] != NONE {
                            if collapse[c].is_infinite() {
                                collapse[c] = alpha;
                            }
                            stack.push(self.left[c]);
                            stack.push(self.right[c]);
                        }
                    }
                }
            }
            breakpoints.push(alpha);
            last = alpha;
        }
        (collapse, breakpoints)
    }
}

/// Candidate penalties between consecutive breakpoints, plus one beyond the
/// last (the root leaf).
fn candidates(breakpoints: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0];
    for w in breakpoints.windows(2) {
        let mid = if w[0] > 0.0 { libm::sqrt(w[0] * w[1]) } else { 0.5 * w[1] };
        c.push(mid);
    }
    if let Some(&last) = breakpoints.last() {
        c.push(if last > 0.0 { 2.0 * last } else { 1.0 });
    }
    c.dedup();
    c
}

fn rebuild(flat: &Flat<'_>, collapse: &[f64], alpha: f64, id: usize) -> TreeNode {
    let node = flat.nodes[id];
    let stats = *node.stats();
    match node {
        TreeNode::Split(s) if collapse[id] > alpha => TreeNode::Split(Box::new(Split {
            feature: s.feature,
            rule: s.rule.clone(),
            stats,
            left: rebuild(flat, collapse, alpha, flat.left[id]),
            right: rebuild(flat, collapse, alpha, flat.right[id]),
        })),
        TreeNode::Split(_) => TreeNode::Leaf(Leaf { value: stats.mean(), index: 0, stats }),
        TreeNode::Leaf(l) => TreeNode::Leaf(l.clone()),
    }
}

/// The optimally pruned subtree for penalty `alpha`.
pub fn prune_at(t: &Tree, alpha: f64) -> Tree {
    let flat = Flat::new(&t.root);
    let (collapse, _) = flat.collapse_alphas();
    Tree::new(rebuild(&flat, &collapse, alpha, 0), t.n_features, t.params)
}

/// Penalty breakpoints of the weakest-link sequence, increasing.
pub fn weakest_link_alphas(t: &Tree) -> Vec<f64> {
    Flat::new(&t.root).collapse_alphas().1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub alphas: Vec<f64>,
    /// Mean held-out squared error per candidate penalty.
    pub cv_losses: Vec<f64>,
    pub chosen_alpha: f64,
}

/// Prunes `t`, which must have been fitted on `data`, choosing the penalty with
/// the lowest `folds`-fold CV loss (ties to the larger penalty). Fold trees
/// are regrown with `t.params`.
pub fn prune_tree(t: &Tree, data: &DesignMatrix, folds: usize, seed: u64) -> Result<Tree> {
    prune_with_report(t, data, folds, seed).map(|(t, _)| t)
}

pub fn prune_with_report(t: &Tree, data: &DesignMatrix, folds: usize, seed: u64) -> Result<(Tree, PruneReport)> {
    if folds < 2 {
        return Err(Error::InvalidParams(format!("pruning needs at least 2 folds, got {folds}")));
    }
    data.check_width(t.n_features)?;
    if t.n_leaves <= 1 {
        let report = PruneReport { alphas: vec![0.0], cv_losses: vec![0.0], chosen_alpha: 0.0 };
        return Ok((t.clone(), report));
    }
    if data.n_rows() < folds {
        return Err(Error::InsufficientData(format!("{} rows cannot fill {folds} folds", data.n_rows())));
    }
    let flat = Flat::new(&t.root);
    let (collapse, breakpoints) = flat.collapse_alphas();
    let alphas = candidates(&breakpoints);
    let binned = Binned::new(data)?;
    let fold = fold_assignment(data.n_rows(), folds, seed);
    let y = data.target();
    // loss_delta[k] accumulates the change in held-out loss entering candidate k.
    let mut loss_delta = vec![0.0; alphas.len() + 1];
    for k in 0..folds {
        let mut rows: Vec<u32> = (0..data.n_rows() as u32).filter(|&i| fold[i as usize] != k).collect();
        if rows.len() < t.params.min_leaf.max(1) {
            continue;
        }
        let root = Grower { binned: &binned, target: y, params: t.params, max_features: None, rng: None }.grow(&mut rows);
        let fflat = Flat::new(&root);
        let (fcollapse, _) = fflat.collapse_alphas();
        for i in (0..data.n_rows()).filter(|&i| fold[i] == k) {
            let row = data.row(i);
            // Path from root; a node answers for every penalty at or above its collapse point.
            let mut path = Vec::new();
            let mut id = 0;
            loop {
                path.push(id);
                match fflat.nodes[id] {
                    TreeNode::Leaf(_) => break,
                    TreeNode::Split(s) => id = if s.rule.goes_left(row[s.feature]) { fflat.left[id] } else { fflat.right[id] },
                }
            }
            let err = |id: usize| {
                let v = fflat.nodes[id].stats().mean();
                let v = match fflat.nodes[id] {
                    TreeNode::Leaf(l) => l.value,
                    TreeNode::Split(_) => v,
                };
                (v - y[i]) * (v - y[i])
            };
            // Deepest node first: it answers below every ancestor's collapse point.
            let mut current = err(*path.last().expect("non-empty path"));
            loss_delta[0] += current;
            for &node in path.iter().rev().skip(1) {
                let at = alphas.partition_point(|&a| a < fcollapse[node]);
                let e = err(node);
                loss_delta[at] += e - current;
                current = e;
            }
        }
    }
    let n = data.n_rows() as f64;
    let mut cv_losses = Vec::with_capacity(alphas.len());
    let mut acc = 0.0;
    for d in &loss_delta[..alphas.len()] {
        acc += d;
        cv_losses.push(acc / n);
    }
    let mut best = 0;
    for k in 1..alphas.len() {
        if cv_losses[k] <= cv_losses[best] {
            best = k;
        }
    }
    let chosen_alpha = alphas[best];
    let pruned = Tree::new(rebuild(&flat, &collapse, chosen_alpha, 0), t.n_features, t.params);
    Ok((pruned, PruneReport { alphas, cv_losses, chosen_alpha }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlcore::dataset::Task;
    use crate::mlcore::tree::{fit_tree, TreeParams};

    fn data(n: usize) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect();
        DesignMatrix::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn breakpoints_increase_and_end_at_the_root() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i)]).collect();
        let y: Vec<f64> = (0..40).map(|i| f64::from((i * 37) % 11)).collect();
        let d = DesignMatrix::from_rows(&rows, y).unwrap();
        let t = fit_tree(&d, &TreeParams { max_depth: 6, min_leaf: 1, task: Task::Regression }).unwrap();
        let a = weakest_link_alphas(&t);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(prune_at(&t, a[a.len() - 1] * 1.01).n_leaves, 1);
        assert_eq!(prune_at(&t, 0.0).n_leaves, t.n_leaves);
        let mut prev = t.n_leaves;
        for &alpha in &a {
            let n = prune_at(&t, alpha).n_leaves;
            assert!(n < prev || n == 1);
            prev = n;
        }
    }

    #[test]
    fn pruned_tree_keeps_the_separating_split() {
        let d = data(60);
        let t = fit_tree(&d, &TreeParams { max_depth: 8, min_leaf: 1, task: Task::Classification }).unwrap();
        let (p, report) = prune_with_report(&t, &d, 5, 1).unwrap();
        assert!(p.n_leaves >= 2);
        assert!(report.cv_losses[report.alphas.iter().position(|&a| a == report.chosen_alpha).unwrap()] <= report.cv_losses[0] + 1e-9);
        for i in 0..60 {
            assert_eq!(p.predict_row(d.row(i)), d.target()[i]);
        }
    }

    #[test]
    fn single_leaf_is_unchanged() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i)]).collect();
        let d = DesignMatrix::from_rows(&rows, vec![0.3; 10]).unwrap();
        let t = fit_tree(&d, &TreeParams::default()).unwrap();
        assert_eq!(prune_tree(&t, &d, 5, 0).unwrap(), t);
    }

    #[test]
    fn one_fold_is_rejected() {
        let d = data(10);
        let t = fit_tree(&d, &TreeParams { min_leaf: 1, ..Default::default() }).unwrap();
        assert!(prune_tree(&t, &d, 1, 0).is_err());
    }
}
