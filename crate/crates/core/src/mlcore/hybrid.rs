//! Boosted-tree leaf indicators concatenated with the original features and
//! fed to an L1 linear model whose penalty is chosen by cross-validation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dataset::DesignMatrix;
use super::gbdt::{fit_gbdt, GbdtModel, GbdtParams, Loss};
use super::linear::{
    check_folds, check_inputs, check_params, fit_at, holdout_path_losses, lambda_grid, lambda_max, select_lambda, CscMatrix, CvResult,
    LinearModel, LinearParams, Link,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridParams {
    pub gbdt: GbdtParams,
    /// `max_iter` and `tol` of the linear stage; link and λ are set here.
    pub linear: LinearParams,
    /// Explicit λ grid; `None` uses `grid_len` points below the data's λ_max.
    pub lambdas: Option<Vec<f64>>,
    pub grid_len: usize,
    pub min_ratio: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for HybridParams {
    fn default() -> Self {
        HybridParams {
            gbdt: GbdtParams::default(),
            linear: LinearParams { tol: 1e-6, ..LinearParams::default() },
            lambdas: None,
            grid_len: 8,
            min_ratio: 1e-2,
            folds: 10,
            seed: 0,
        }
    }
}

/// Column layout of the linear stage: leaf blocks first, then originals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridLayout {
    /// First encoded column of each tree's leaf block.
    pub leaf_offsets: Vec<usize>,
    pub encoded_width: usize,
    pub original_width: usize,
}

impl HybridLayout {
    fn of(encoder: &GbdtModel, original_width: usize) -> Self {
        let mut leaf_offsets = Vec::with_capacity(encoder.trees.len());
        let mut offset = 0;
        for t in &encoder.trees {
            leaf_offsets.push(offset);
            offset += t.n_leaves;
        }
        HybridLayout { leaf_offsets, encoded_width: offset, original_width }
    }

    pub fn n_coefficients(&self) -> usize {
        self.encoded_width + self.original_width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub encoder: GbdtModel,
    pub linear: LinearModel,
    pub layout: HybridLayout,
    pub cv: CvResult,
}

impl HybridModel {
    pub fn raw_score(&self, tree_row: &[f64], linear_row: &[f64]) -> f64 {
        let encoded = self.encoder.trees.iter().zip(&self.layout.leaf_offsets).map(|(t, &o)| (o + t.leaf_for(tree_row).index, 1.0));
        let original = linear_row.iter().enumerate().map(|(j, &x)| (self.layout.encoded_width + j, x));
        self.linear.raw_score_sparse(encoded.chain(original))
    }

    pub fn predict_row(&self, tree_row: &[f64], linear_row: &[f64]) -> f64 {
        self.linear.link_inverse(self.raw_score(tree_row, linear_row))
    }

    pub fn predict(&self, tree_data: &DesignMatrix, linear_data: &DesignMatrix) -> Result<Vec<f64>> {
        tree_data.check_width(self.encoder.n_features)?;
        linear_data.check_width(self.layout.original_width)?;
        if tree_data.n_rows() != linear_data.n_rows() {
            return Err(Error::InvalidParams(format!("{} tree rows vs {} linear rows", tree_data.n_rows(), linear_data.n_rows())));
        }
        Ok((0..tree_data.n_rows()).map(|i| self.predict_row(tree_data.row(i), linear_data.row(i))).collect())
    }
}

/// Design of the linear stage as sparse columns.
pub fn augmented_design(encoder: &GbdtModel, tree_data: &DesignMatrix, linear_data: &DesignMatrix) -> CscMatrix {
    let layout = HybridLayout::of(encoder, linear_data.n_cols());
    let mut columns: Vec<Vec<(u32, f64)>> = vec![Vec::new(); layout.n_coefficients()];
    for i in 0..tree_data.n_rows() {
        let row = tree_data.row(i);
        for (t, &o) in encoder.trees.iter().zip(&layout.leaf_offsets) {
            columns[o + t.leaf_for(row).index].push((i as u32, 1.0));
        }
        for (j, &x) in linear_data.row(i).iter().enumerate() {
            if x != 0.0 {
                columns[layout.encoded_width + j].push((i as u32, x));
            }
        }
    }
    CscMatrix::from_columns(tree_data.n_rows(), columns)
}

/// Fits the encoder on `tree_data` and the L1 stage on the augmented design.
/// Both matrices describe the same rows; the target is read from `tree_data`.
///
/// Each CV fold refits the encoder on its own training rows, so held-out rows
/// never shaped the leaves they are scored through.
pub fn fit_hybrid(tree_data: &DesignMatrix, linear_data: &DesignMatrix, params: &HybridParams) -> Result<HybridModel> {
    if tree_data.n_rows() != linear_data.n_rows() || tree_data.target() != linear_data.target() {
        return Err(Error::InvalidParams(format!(
            "tree and linear layouts disagree on rows ({} vs {}) or targets",
            tree_data.n_rows(),
            linear_data.n_rows()
        )));
    }
    let link = match params.gbdt.loss {
        Loss::Squared => Link::Identity,
        Loss::Logistic => Link::Logistic,
    };
    let linear_params = LinearParams { link, ..params.linear };
    check_params(&linear_params)?;
    let encoder = fit_gbdt(tree_data, &params.gbdt)?;
    let x = augmented_design(&encoder, tree_data, linear_data);
    let y = tree_data.target();
    check_inputs(&x, y, link)?;
    let lambdas = match &params.lambdas {
        Some(l) => l.clone(),
        None => lambda_grid(lambda_max(&x, y, link), params.grid_len, params.min_ratio),
    };
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidParams(String::from("λ grid must be non-empty, finite and non-negative")));
    }
    let mut losses = vec![0.0; lambdas.len()];
    let chosen = if lambdas.len() == 1 {
        lambdas[0]
    } else {
        let n = y.len();
        let fold = check_folds(n, params.folds, params.seed)?;
        for k in 0..params.folds {
            let train: Vec<usize> = (0..n).filter(|&i| fold[i] != k).collect();
            let hold: Vec<usize> = (0..n).filter(|&i| fold[i] == k).collect();
            let (tt, lt) = (tree_data.subset(&train), linear_data.subset(&train));
            let (th, lh) = (tree_data.subset(&hold), linear_data.subset(&hold));
            let enc = fit_gbdt(&tt, &params.gbdt)?;
            let xt = augmented_design(&enc, &tt, &lt);
            let xh = augmented_design(&enc, &th, &lh);
            for (acc, l) in losses.iter_mut().zip(holdout_path_losses(&xt, tt.target(), &xh, th.target(), &linear_params, &lambdas)) {
                *acc += l;
            }
        }
        losses.iter_mut().for_each(|l| *l /= n as f64);
        select_lambda(&lambdas, &losses)
    };
    let linear = fit_at(&x, y, &linear_params, chosen)?;
    let layout = HybridLayout::of(&encoder, linear_data.n_cols());
    Ok(HybridModel { encoder, linear, layout, cv: CvResult { lambdas, losses, chosen } })
}
