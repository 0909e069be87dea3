//! Predictor families: linear and L1-linear models, cost-complexity pruned
//! trees, random forests, gradient boosted trees and the hybrid model that
//! feeds boosted-tree leaf indicators into an L1 linear model.

pub mod dataset;
pub mod forest;
pub mod gbdt;
pub mod hybrid;
pub mod linear;
pub mod prune;
pub mod tree;

pub use dataset::{DesignMatrix, FeatureKind, Task};
pub use forest::{fit_forest, Forest, ForestParams};
pub use gbdt::{fit_gbdt, GbdtModel, GbdtParams, Loss};
pub use hybrid::{fit_hybrid, HybridLayout, HybridModel, HybridParams};
pub use linear::{fit_lasso_cv, fit_linear, CscMatrix, CvLoss, CvResult, LinearModel, LinearParams, Link};
pub use prune::{prune_tree, PruneReport};
pub use tree::{fit_tree, Leaf, NodeStats, Split, SplitRule, Tree, TreeNode, TreeParams};

use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::rng::stream;

/// Seeded assignment of `n` rows to `k` folds of near-equal size.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, "folds"));
    let mut fold = alloc::vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % k.max(1);
    }
    fold
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}
