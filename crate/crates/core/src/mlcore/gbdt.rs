use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::dataset::{DesignMatrix, Task};
use super::tree::{check_tree_params, Binned, Grower, Tree, TreeNode, TreeParams};
use super::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::rng::indexed_stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    Squared,
    Logistic,
}

impl Loss {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification => Loss::Logistic,
            Task::Regression => Loss::Squared,
        }
    }

    /// Loss of one row at raw score `f`.
    pub fn value(self, f: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (y - f) * (y - f),
            Loss::Logistic => softplus(f) - y * f,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub learning_rate: f64,
    pub loss: Loss,
    /// Fraction of rows each round is fitted on, drawn without replacement.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams { n_trees: 30, max_depth: 3, min_leaf: 20, learning_rate: 0.1, loss: Loss::Squared, subsample: 1.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub loss: Loss,
    pub n_features: usize,
}

impl GbdtModel {
    /// `base + η Σ tree outputs` over the first `n` trees.
    pub fn raw_score_n(&self, row: &[f64], n: usize) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().take(n).map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.raw_score_n(row, self.trees.len())
    }

    /// Probability for the logistic loss, raw score otherwise.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.loss {
            Loss::Squared => self.raw_score(row),
            Loss::Logistic => sigmoid(self.raw_score(row)),
        }
    }

    pub fn predict(&self, data: &DesignMatrix) -> Result<Vec<f64>> {
        data.check_width(self.n_features)?;
        Ok((0..data.n_rows()).map(|i| self.predict_row(data.row(i))).collect())
    }

    /// Width of the leaf encoding: total leaves over all trees.
    pub fn encoded_width(&self) -> usize {
        self.trees.iter().map(|t| t.n_leaves).sum()
    }

    pub fn leaf_indices(&self, row: &[f64]) -> Vec<usize> {
        self.trees.iter().map(|t| t.leaf_for(row).index).collect()
    }

    /// Concatenated one-hot of the leaf reached in each tree.
    pub fn encode_leaves(&self, row: &[f64]) -> Vec<u8> {
        let mut out = vec![0u8; self.encoded_width()];
        let mut offset = 0;
        for t in &self.trees {
            out[offset + t.leaf_for(row).index] = 1;
            offset += t.n_leaves;
        }
        out
    }
}

pub fn encode_leaves(model: &GbdtModel, row: &[f64]) -> Vec<u8> {
    model.encode_leaves(row)
}

fn set_leaf_values(node: &mut TreeNode, values: &[f64]) {
    match node {
        TreeNode::Leaf(l) => l.value = values[l.index],
        TreeNode::Split(s) => {
            set_leaf_values(&mut s.left, values);
            set_leaf_values(&mut s.right, values);
        }
    }
}

/// Stagewise boosting of regression trees on the negative gradient. Squared
/// loss leaves take the mean residual; logistic leaves take one Newton step
/// `Σ(y - p) / Σ p(1 - p)`.
pub fn fit_gbdt(data: &DesignMatrix, params: &GbdtParams) -> Result<GbdtModel> {
    if !(params.learning_rate >= 0.0 && params.learning_rate.is_finite()) {
        return Err(Error::InvalidParams(format!("learning_rate must be finite and non-negative, got {}", params.learning_rate)));
    }
    if !(params.subsample > 0.0 && params.subsample <= 1.0) {
        return Err(Error::InvalidParams(format!("subsample must lie in (0, 1], got {}", params.subsample)));
    }
    let tree_params = TreeParams { max_depth: params.max_depth, min_leaf: params.min_leaf.max(1), task: Task::Regression };
    check_tree_params(&tree_params, data)?;
    if params.loss == Loss::Logistic {
        data.require_binary()?;
    }
    let y = data.target();
    let n = data.n_rows();
    let mean = y.iter().sum::<f64>() / n as f64;
    let base_score = match params.loss {
        Loss::Squared => mean,
        Loss::Logistic => {
            let p = mean.clamp(1e-6, 1.0 - 1e-6);
            libm::log(p / (1.0 - p))
        }
    };
    let binned = if params.n_trees > 0 { Some(Binned::new(data)?) } else { None };
    let mut score = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for round in 0..params.n_trees {
        let binned = binned.as_ref().expect("binned when trees are requested");
        let prob: Vec<f64> = match params.loss {
            Loss::Squared => score.clone(),
            Loss::Logistic => score.iter().map(|&f| sigmoid(f)).collect(),
        };
        let residual: Vec<f64> = y.iter().zip(&prob).map(|(y, p)| y - p).collect();
        let mut rows: Vec<u32> = if params.subsample < 1.0 {
            let m = (libm::round(params.subsample * n as f64) as usize).clamp(1, n);
            let mut r: Vec<u32> = index::sample(&mut indexed_stream(params.seed, "gbdt", round as u64), n, m)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            r.sort_unstable();
            r
        } else {
            (0..n as u32).collect()
        };
        let fitted_rows = rows.clone();
        let mut root = Grower { binned, target: &residual, params: tree_params, max_features: None, rng: None }.grow(&mut rows);
        let n_leaves = root.n_leaves();
        if params.loss == Loss::Logistic {
            let mut num = vec![0.0; n_leaves];
            let mut den = vec![0.0; n_leaves];
            for &r in &fitted_rows {
                let l = root.leaf_for(data.row(r as usize)).index;
                num[l] += residual[r as usize];
                den[l] += prob[r as usize] * (1.0 - prob[r as usize]);
            }
            let values: Vec<f64> = num.iter().zip(&den).map(|(a, b)| if *b > 1e-12 { a / b } else { 0.0 }).collect();
            set_leaf_values(&mut root, &values);
        }
        let tree = Tree::new(root, data.n_cols(), tree_params);
        for (i, s) in score.iter_mut().enumerate() {
            *s += params.learning_rate * tree.predict_row(data.row(i));
        }
        trees.push(tree);
    }
    Ok(GbdtModel { trees, learning_rate: params.learning_rate, base_score, loss: params.loss, n_features: data.n_cols() })
}
