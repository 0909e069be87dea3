//! Uniform training and prediction over feature records for every model kind.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlcore::{
    fit_forest, fit_gbdt, fit_hybrid, fit_lasso_cv, fit_linear, fit_tree, linear, prune_tree, CscMatrix, DesignMatrix,
    CvLoss, Forest, ForestParams, GbdtModel, GbdtParams, HybridModel, HybridParams, LinearModel, LinearParams, Link, Loss, Task,
    Tree, TreeParams,
};
use crate::pairfeat::{CategorySet, FeatureLayout, FeatureRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    L1Linear,
    #[serde(rename = "tree")]
    PrunedTree,
    #[serde(rename = "forest")]
    RandomForest,
    Gbdt,
    Hybrid,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Linear,
        ModelKind::L1Linear,
        ModelKind::PrunedTree,
        ModelKind::RandomForest,
        ModelKind::Gbdt,
        ModelKind::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::L1Linear => "l1linear",
            ModelKind::PrunedTree => "tree",
            ModelKind::RandomForest => "forest",
            ModelKind::Gbdt => "gbdt",
            ModelKind::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownKey(String::from(s)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Linear(LinearModel),
    L1Linear(LinearModel),
    PrunedTree(Tree),
    RandomForest(Forest),
    Gbdt(GbdtModel),
    Hybrid(HybridModel),
}

/// Hyperparameters of every family; the task fixes losses and links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub tree: TreeParams,
    pub prune_folds: usize,
    pub forest: ForestParams,
    pub gbdt: GbdtParams,
    pub linear: LinearParams,
    /// λ grid of the L1 models: `grid_len` points from λ_max down by `min_ratio`.
    pub grid_len: usize,
    pub min_ratio: f64,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            tree: TreeParams { max_depth: 16, min_leaf: 10, task: Task::Regression },
            prune_folds: 10,
            forest: ForestParams::default(),
            gbdt: GbdtParams::default(),
            linear: LinearParams { tol: 1e-6, ..LinearParams::default() },
            grid_len: 8,
            min_ratio: 1e-2,
            cv_folds: 10,
            seed: 0,
        }
    }
}

/// A trained model with the feature layout it consumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub kind: ModelKind,
    pub task: Task,
    pub layout: FeatureLayout,
    pub model: TrainedModel,
}

/// λ is selected on the metric the task reports: held-out MAE for regression.
fn cv_loss_of(task: Task) -> CvLoss {
    match task {
        Task::Classification => CvLoss::Deviance,
        Task::Regression => CvLoss::Absolute,
    }
}

fn link_of(task: Task) -> Link {
    match task {
        Task::Classification => Link::Logistic,
        Task::Regression => Link::Identity,
    }
}

impl Predictor {
    /// Fits `kind` on records with the given targets (0/1 for classification).
    pub fn train(
        kind: ModelKind,
        task: Task,
        records: &[FeatureRecord],
        targets: &[f64],
        categories: CategorySet,
        params: &TrainParams,
    ) -> Result<Self> {
        let layout = FeatureLayout::fit(records, categories);
        let tree_data = || layout.tree_matrix(records, targets.to_vec());
        let linear_data = || layout.linear_matrix(records, targets.to_vec());
        let link = link_of(task);
        let model = match kind {
            ModelKind::Linear => {
                let p = LinearParams { link, l1_lambda: 0.0, ..params.linear };
                TrainedModel::Linear(fit_linear(&linear_data()?, &p)?)
            }
            ModelKind::L1Linear => {
                let data = linear_data()?;
                let x = CscMatrix::from_design(&data);
                let p = LinearParams { link, cv_loss: cv_loss_of(task), ..params.linear };
                let grid = linear::lambda_grid(linear::lambda_max(&x, data.target(), link), params.grid_len, params.min_ratio);
                let (m, _) = fit_lasso_cv(&x, data.target(), &p, &grid, params.cv_folds, params.seed)?;
                TrainedModel::L1Linear(m)
            }
            ModelKind::PrunedTree => {
                let data = tree_data()?;
                let t = fit_tree(&data, &TreeParams { task, ..params.tree })?;
                TrainedModel::PrunedTree(prune_tree(&t, &data, params.prune_folds, params.seed)?)
            }
            ModelKind::RandomForest => {
                let p = ForestParams { tree: TreeParams { task, ..params.forest.tree }, seed: params.seed, ..params.forest };
                TrainedModel::RandomForest(fit_forest(&tree_data()?, &p)?)
            }
            ModelKind::Gbdt => {
                let p = GbdtParams { loss: Loss::for_task(task), seed: params.seed, ..params.gbdt };
                TrainedModel::Gbdt(fit_gbdt(&tree_data()?, &p)?)
            }
            ModelKind::Hybrid => {
                let p = HybridParams {
                    gbdt: GbdtParams { loss: Loss::for_task(task), seed: params.seed, ..params.gbdt },
                    linear: LinearParams { cv_loss: cv_loss_of(task), ..params.linear },
                    lambdas: None,
                    grid_len: params.grid_len,
                    min_ratio: params.min_ratio,
                    folds: params.cv_folds,
                    seed: params.seed,
                };
                TrainedModel::Hybrid(fit_hybrid(&tree_data()?, &linear_data()?, &p)?)
            }
        };
        Ok(Predictor { kind, task, layout, model })
    }

    /// Probability for classification, unclamped score for regression.
    pub fn predict_record(&self, r: &FeatureRecord) -> f64 {
        let mut tree_row = Vec::new();
        let mut linear_row = Vec::new();
        match &self.model {
            TrainedModel::Linear(m) | TrainedModel::L1Linear(m) => {
                self.layout.linear_row(r, &mut linear_row);
                m.predict_row(&linear_row)
            }
            TrainedModel::PrunedTree(t) => {
                self.layout.tree_row(r, &mut tree_row);
                t.predict_row(&tree_row)
            }
            TrainedModel::RandomForest(f) => {
                self.layout.tree_row(r, &mut tree_row);
                f.predict_row(&tree_row)
            }
            TrainedModel::Gbdt(g) => {
                self.layout.tree_row(r, &mut tree_row);
                g.predict_row(&tree_row)
            }
            TrainedModel::Hybrid(h) => {
                self.layout.tree_row(r, &mut tree_row);
                self.layout.linear_row(r, &mut linear_row);
                h.predict_row(&tree_row, &linear_row)
            }
        }
    }

    pub fn predict(&self, records: &[FeatureRecord]) -> Vec<f64> {
        records.iter().map(|r| self.predict_record(r)).collect()
    }

    /// Predicts from prebuilt matrices in this predictor's layouts.
    pub fn predict_matrices(&self, tree_data: &DesignMatrix, linear_data: &DesignMatrix) -> Result<Vec<f64>> {
        match &self.model {
            TrainedModel::Linear(m) | TrainedModel::L1Linear(m) => m.predict(linear_data),
            TrainedModel::PrunedTree(t) => t.predict(tree_data),
            TrainedModel::RandomForest(f) => f.predict(tree_data),
            TrainedModel::Gbdt(g) => g.predict(tree_data),
            TrainedModel::Hybrid(h) => h.predict(tree_data, linear_data),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CityId;
    use crate::pairfeat::GenderPair;
    use alloc::vec;

    fn records(n: usize) -> (Vec<FeatureRecord>, Vec<f64>) {
        let recs: Vec<FeatureRecord> = (0..n)
            .map(|i| FeatureRecord {
                gender_pair: [GenderPair::MM, GenderPair::MF, GenderPair::FF][i % 3],
                age_target: 15 + (i % 20) as u32,
                age_helper: 15 + (i % 13) as u32,
                city_target: CityId((i % 4) as u32),
                city_helper: CityId((i % 5) as u32),
                same_city: i % 4 == i % 5,
                friendship: i % 7 == 0,
                common_friend_ratio: (i % 10) as f64 / 10.0,
                common_groups: (i % 3) as u32,
                msg_count_month: (i % 7 == 0) as u32 * 4,
                msg_days_month: (i % 7 == 0) as u32 * 2,
                past_sim_month: (i % 11) as f64 / 11.0,
                has_past: i % 11 != 0,
                helper_individuality: (i % 6) as f64 / 6.0,
                has_individuality: true,
            })
            .collect();
        let y = recs.iter().map(|r| 0.5 * r.past_sim_month + 0.1 * f64::from(u8::from(r.friendship))).collect();
        (recs, y)
    }

    #[test]
    fn every_kind_trains_and_predicts_both_tasks() {
        let (recs, y) = records(300);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        // flipped labels keep the classes overlapping so that the MLE exists
        let labels: Vec<f64> =
            y.iter().enumerate().map(|(i, &v)| f64::from(u8::from((v > mean) != (i * 7919 % 13 < 3)))).collect();
        let params = TrainParams {
            forest: ForestParams { n_trees: 5, ..Default::default() },
            gbdt: GbdtParams { n_trees: 5, ..Default::default() },
            cv_folds: 3,
            prune_folds: 3,
            ..Default::default()
        };
        for kind in ModelKind::ALL {
            let p = Predictor::train(kind, Task::Classification, &recs, &labels, CategorySet::ALL, &params).unwrap();
            let out = p.predict(&recs);
            assert!(out.iter().all(|v| (0.0..=1.0).contains(v)), "{kind}");
            let p = Predictor::train(kind, Task::Regression, &recs, &y, CategorySet::ALL, &params).unwrap();
            let tree = p.layout.tree_matrix(&recs, y.clone()).unwrap();
            let lin = p.layout.linear_matrix(&recs, y.clone()).unwrap();
            assert_eq!(p.predict_matrices(&tree, &lin).unwrap(), p.predict(&recs), "{kind}");
        }
    }

    #[test]
    fn layout_mismatch_is_reported() {
        let (recs, y) = records(60);
        let p = Predictor::train(ModelKind::Linear, Task::Regression, &recs, &y, CategorySet::ALL, &TrainParams::default()).unwrap();
        let narrow = DesignMatrix::from_rows(&[vec![1.0]], vec![0.0]).unwrap();
        assert!(matches!(p.predict_matrices(&narrow, &narrow), Err(Error::LayoutMismatch { .. })));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
