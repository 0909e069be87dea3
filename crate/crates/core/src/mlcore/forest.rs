use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::dataset::DesignMatrix;
use super::tree::{check_tree_params, Binned, Grower, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::rng::indexed_stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Fraction of features drawn as split candidates at each node; 1 disables subsampling.
    pub feature_subsample: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 60,
            tree: TreeParams { max_depth: 14, min_leaf: 5, ..TreeParams::default() },
            feature_subsample: 0.5,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

impl Forest {
    /// Mean of the trees' leaf values (class probabilities for classification).
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, data: &DesignMatrix) -> Result<Vec<f64>> {
        data.check_width(self.n_features)?;
        Ok((0..data.n_rows()).map(|i| self.predict_row(data.row(i))).collect())
    }
}

/// Bagged trees; tree `k` draws its bootstrap and feature subsets from its own
/// indexed stream.
pub fn fit_forest(data: &DesignMatrix, params: &ForestParams) -> Result<Forest> {
    if params.n_trees < 1 {
        return Err(Error::InvalidParams(format!("a forest needs at least one tree, got {}", params.n_trees)));
    }
    if !(params.feature_subsample > 0.0 && params.feature_subsample <= 1.0) {
        return Err(Error::InvalidParams(format!("feature_subsample must lie in (0, 1], got {}", params.feature_subsample)));
    }
    check_tree_params(&params.tree, data)?;
    let binned = Binned::new(data)?;
    let n = data.n_rows();
    let d = data.n_cols();
    let max_features = if params.feature_subsample < 1.0 {
        Some((libm::ceil(params.feature_subsample * d as f64) as usize).clamp(1, d.max(1)))
    } else {
        None
    };
    let trees = (0..params.n_trees)
        .map(|k| {
            let mut rng = indexed_stream(params.seed, "forest", k as u64);
            let mut rows: Vec<u32> = if params.bootstrap {
                let mut r: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
                r.sort_unstable();
                r
            } else {
                (0..n as u32).collect()
            };
            let root = Grower { binned: &binned, target: data.target(), params: params.tree, max_features, rng: Some(&mut rng) }
                .grow(&mut rows);
            Tree::new(root, d, params.tree)
        })
        .collect();
    Ok(Forest { trees, n_features: d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlcore::tree::fit_tree;
    use alloc::vec;

    fn data() -> DesignMatrix {
        let rows: Vec<Vec<f64>> = (0..80).map(|i| vec![f64::from(i % 9), f64::from(i % 5), f64::from(i)]).collect();
        let y: Vec<f64> = (0..80).map(|i| f64::from((i % 9) * (i % 5)) / 32.0).collect();
        DesignMatrix::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn degenerate_forest_equals_a_tree() {
        let d = data();
        let tree = TreeParams { max_depth: 4, min_leaf: 2, ..Default::default() };
        let f = fit_forest(&d, &ForestParams { n_trees: 1, tree, feature_subsample: 1.0, bootstrap: false, seed: 9 }).unwrap();
        assert_eq!(f.trees[0], fit_tree(&d, &tree).unwrap());
    }

    #[test]
    fn seeded_forest_is_reproducible() {
        let d = data();
        let p = ForestParams { n_trees: 5, seed: 3, ..Default::default() };
        assert_eq!(fit_forest(&d, &p).unwrap(), fit_forest(&d, &p).unwrap());
        assert_ne!(fit_forest(&d, &p).unwrap(), fit_forest(&d, &ForestParams { seed: 4, ..p }).unwrap());
    }

    #[test]
    fn zero_trees_is_an_error() {
        assert!(fit_forest(&data(), &ForestParams { n_trees: 0, ..Default::default() }).is_err());
    }
}
