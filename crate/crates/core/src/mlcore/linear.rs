//! Linear and logistic models with an L1 penalty, fitted by cyclic coordinate
//! descent over standardized sparse columns.
//!
//! The penalized objective is `L(b, β) + λ‖β‖₁` in standardized coordinates,
//! where `L` is half the mean squared error (identity link) or the mean
//! logistic loss (logistic link, via iteratively reweighted least squares).
//! Standardized columns are never materialized: a column is kept as its raw
//! nonzeros plus `(mean, scale)`, and residuals carry a global shift so that
//! a coordinate step touches only that column's nonzeros.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dataset::DesignMatrix;
use super::{fold_assignment, sigmoid, softplus};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Identity,
    Logistic,
}

/// Held-out criterion for choosing λ by cross-validation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvLoss {
    /// Squared error (identity link) or log loss (logistic link).
    #[default]
    Deviance,
    /// Absolute error of the link-inverse prediction.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub link: Link,
    pub l1_lambda: f64,
    /// Cap on coordinate-descent sweeps, summed over reweighting rounds.
    pub max_iter: usize,
    /// Convergence threshold on the largest standardized coefficient change.
    pub tol: f64,
    #[serde(default)]
    pub cv_loss: CvLoss,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams { link: Link::Identity, l1_lambda: 0.0, max_iter: 20_000, tol: 1e-7, cv_loss: CvLoss::Deviance }
    }
}

/// Fitted model; `weights` and `intercept` act on raw (unstandardized) features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub link: Link,
    pub l1_lambda: f64,
    /// Column means used for standardization.
    pub means: Vec<f64>,
    /// Column standard deviations; 0 marks a constant column (weight fixed at 0).
    pub scales: Vec<f64>,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn n_nonzero(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }

    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }

    /// Score from `(column, value)` nonzeros; omitted columns are 0.
    pub fn raw_score_sparse(&self, entries: impl IntoIterator<Item = (usize, f64)>) -> f64 {
        self.intercept + entries.into_iter().map(|(j, x)| self.weights[j] * x).sum::<f64>()
    }

    pub fn link_inverse(&self, eta: f64) -> f64 {
        match self.link {
            Link::Identity => eta,
            Link::Logistic => sigmoid(eta),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.link_inverse(self.raw_score(row))
    }

    pub fn predict(&self, data: &DesignMatrix) -> Result<Vec<f64>> {
        data.check_width(self.n_features())?;
        Ok((0..data.n_rows()).map(|i| self.predict_row(data.row(i))).collect())
    }

    /// Coefficients on the standardized scale.
    pub fn standardized_weights(&self) -> Vec<f64> {
        self.weights.iter().zip(&self.scales).map(|(w, s)| w * s).collect()
    }

    fn from_standardized(beta: &[f64], b: f64, link: Link, l1_lambda: f64, st: &Standardization) -> Self {
        let weights: Vec<f64> =
            beta.iter().zip(&st.scales).map(|(&bj, &s)| if s > 0.0 { bj / s } else { 0.0 }).collect();
        let intercept = b - weights.iter().zip(&st.means).map(|(w, m)| w * m).sum::<f64>();
        LinearModel { weights, intercept, link, l1_lambda, means: st.means.clone(), scales: st.scales.clone() }
    }
}

/// Compressed sparse columns; zeros are not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds from per-column `(row, value)` lists; each list ascending by row.
    pub fn from_columns(n_rows: usize, columns: Vec<Vec<(u32, f64)>>) -> Self {
        let mut col_ptr = Vec::with_capacity(columns.len() + 1);
        col_ptr.push(0);
        let nnz = columns.iter().map(Vec::len).sum();
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for col in columns {
            for (r, v) in col {
                if v != 0.0 {
                    debug_assert!((r as usize) < n_rows);
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix { n_rows, col_ptr, row_idx, values }
    }

    pub fn from_design(data: &DesignMatrix) -> Self {
        let d = data.n_cols();
        let mut columns = vec![Vec::new(); d];
        for i in 0..data.n_rows() {
            for (j, &v) in data.row(i).iter().enumerate() {
                if v != 0.0 {
                    columns[j].push((i as u32, v));
                }
            }
        }
        Self::from_columns(data.n_rows(), columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    /// Keeps the rows where `keep` is true, renumbered in order.
    pub fn select_rows(&self, keep: &[bool]) -> CscMatrix {
        let mut new_index = vec![u32::MAX; self.n_rows];
        let mut n = 0u32;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                new_index[i] = n;
                n += 1;
            }
        }
        let columns = (0..self.n_cols())
            .map(|j| {
                let (rows, vals) = self.column(j);
                rows.iter()
                    .zip(vals)
                    .filter(|(r, _)| new_index[**r as usize] != u32::MAX)
                    .map(|(r, v)| (new_index[*r as usize], *v))
                    .collect()
            })
            .collect();
        CscMatrix::from_columns(n as usize, columns)
    }

    /// `intercept + X w` for every row.
    pub fn scores(&self, weights: &[f64], intercept: f64) -> Vec<f64> {
        let mut eta = vec![intercept; self.n_rows];
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (rows, vals) = self.column(j);
            for (r, v) in rows.iter().zip(vals) {
                eta[*r as usize] += w * v;
            }
        }
        eta
    }
}

#[derive(Clone, Debug)]
struct Standardization {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardization {
    fn compute(x: &CscMatrix) -> Self {
        let n = x.n_rows() as f64;
        let mut means = Vec::with_capacity(x.n_cols());
        let mut scales = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let (_, vals) = x.column(j);
            let mean = vals.iter().sum::<f64>() / n;
            let zeros = n - vals.len() as f64;
            let ss = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() + zeros * mean * mean;
            let sd = libm::sqrt(ss / n);
            // Scales negligible against the column magnitude are treated as constant.
            let constant = sd <= 1e-12 * (1.0 + libm::fabs(mean));
            means.push(mean);
            scales.push(if constant { 0.0 } else { sd });
        }
        Standardization { means, scales }
    }
}

struct Solution {
    beta: Vec<f64>,
    b: f64,
    sweeps: usize,
    converged: bool,
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn initial_intercept(y: &[f64], link: Link) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    match link {
        Link::Identity => mean,
        Link::Logistic => {
            let p = mean.clamp(1e-6, 1.0 - 1e-6);
            libm::log(p / (1.0 - p))
        }
    }
}

/// Linear predictor `b + Σ β_j (x_j - μ_j)/σ_j` for every row.
fn standardized_scores(x: &CscMatrix, st: &Standardization, beta: &[f64], b: f64) -> Vec<f64> {
    let mut base = b;
    let mut raw = vec![0.0; beta.len()];
    for j in 0..beta.len() {
        if beta[j] != 0.0 && st.scales[j] > 0.0 {
            raw[j] = beta[j] / st.scales[j];
            base -= raw[j] * st.means[j];
        }
    }
    x.scores(&raw, base)
}

/// Weighted penalized least squares `(1/2n) Σ w (z - η)² + λ‖β‖₁` by coordinate
/// descent from the current `(beta, b)`; residuals `z - η` are passed in.
struct Quadratic<'a> {
    x: &'a CscMatrix,
    st: &'a Standardization,
    w: Vec<f64>,
    // residual r_i = rt_i + shift
    rt: Vec<f64>,
    shift: f64,
    rt_sum: f64,
    w_sum: f64,
    sx: Vec<f64>,
    curvature: Vec<f64>,
    n: f64,
}

impl<'a> Quadratic<'a> {
    fn new(x: &'a CscMatrix, st: &'a Standardization, w: Vec<f64>, residual: Vec<f64>) -> Self {
        let n = x.n_rows() as f64;
        let w_sum: f64 = w.iter().sum();
        let rt_sum = w.iter().zip(&residual).map(|(a, r)| a * r).sum();
        let mut sx = vec![0.0; x.n_cols()];
        let mut curvature = vec![0.0; x.n_cols()];
        for j in 0..x.n_cols() {
            let s = st.scales[j];
            if s == 0.0 {
                continue;
            }
            let (rows, vals) = x.column(j);
            let (mut a, mut b) = (0.0, 0.0);
            for (r, v) in rows.iter().zip(vals) {
                let wv = w[*r as usize] * v;
                a += wv;
                b += wv * v;
            }
            let m = st.means[j];
            sx[j] = a;
            curvature[j] = ((b - 2.0 * m * a + m * m * w_sum) / (n * s * s)).max(0.0);
        }
        Quadratic { x, st, w, rt: residual, shift: 0.0, rt_sum, w_sum, sx, curvature, n }
    }

    fn update_coordinate(&mut self, j: usize, beta: &mut [f64], lambda: f64) -> f64 {
        let a = self.curvature[j];
        if a <= 0.0 {
            return 0.0;
        }
        let (s, m) = (self.st.scales[j], self.st.means[j]);
        let (rows, vals) = self.x.column(j);
        let mut dot = 0.0;
        for (r, v) in rows.iter().zip(vals) {
            let i = *r as usize;
            dot += self.w[i] * v * self.rt[i];
        }
        dot += self.shift * self.sx[j];
        let total = self.rt_sum + self.shift * self.w_sum;
        let g = (dot - m * total) / (self.n * s);
        let old = beta[j];
        let new = soft_threshold(a * old + g, lambda) / a;
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            let step = delta / s;
            for (r, v) in rows.iter().zip(vals) {
                self.rt[*r as usize] -= step * v;
            }
            self.rt_sum -= step * self.sx[j];
            self.shift += step * m;
        }
        libm::fabs(delta)
    }

    fn update_intercept(&mut self, b: &mut f64) -> f64 {
        if self.w_sum <= 0.0 {
            return 0.0;
        }
        let delta = (self.rt_sum + self.shift * self.w_sum) / self.w_sum;
        *b += delta;
        self.shift -= delta;
        libm::fabs(delta)
    }

    /// Sweeps until every coordinate moves less than `tol`; returns sweeps used
    /// and whether the budget sufficed.
    fn solve(&mut self, beta: &mut [f64], b: &mut f64, lambda: f64, tol: f64, budget: usize) -> (usize, bool) {
        let d = beta.len();
        let mut sweeps = 0;
        loop {
            let mut moved = self.update_intercept(b);
            for j in 0..d {
                moved = moved.max(self.update_coordinate(j, beta, lambda));
            }
            sweeps += 1;
            if moved < tol {
                return (sweeps, true);
            }
            if sweeps >= budget {
                return (sweeps, false);
            }
            // Cycle the active set to convergence before the next full sweep.
            let active: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
            loop {
                let mut moved = self.update_intercept(b);
                for &j in &active {
                    moved = moved.max(self.update_coordinate(j, beta, lambda));
                }
                sweeps += 1;
                if moved < tol {
                    break;
                }
                if sweeps >= budget {
                    return (sweeps, false);
                }
            }
        }
    }
}

const MIN_IRLS_WEIGHT: f64 = 1e-5;
const MAX_IRLS_ROUNDS: usize = 200;

fn solve(
    x: &CscMatrix,
    y: &[f64],
    st: &Standardization,
    link: Link,
    lambda: f64,
    max_iter: usize,
    tol: f64,
    start: Option<(&[f64], f64)>,
) -> Solution {
    let d = x.n_cols();
    let (mut beta, mut b) = match start {
        Some((beta, b)) => (beta.to_vec(), b),
        None => (vec![0.0; d], initial_intercept(y, link)),
    };
    match link {
        Link::Identity => {
            let eta = standardized_scores(x, st, &beta, b);
            let residual = y.iter().zip(&eta).map(|(y, e)| y - e).collect();
            let mut q = Quadratic::new(x, st, vec![1.0; y.len()], residual);
            let (sweeps, converged) = q.solve(&mut beta, &mut b, lambda, tol, max_iter.max(1));
            Solution { beta, b, sweeps, converged }
        }
        Link::Logistic => {
            let mut sweeps = 0;
            for _ in 0..MAX_IRLS_ROUNDS {
                let eta = standardized_scores(x, st, &beta, b);
                let mut w = Vec::with_capacity(y.len());
                let mut residual = Vec::with_capacity(y.len());
                for (yi, e) in y.iter().zip(&eta) {
                    let p = sigmoid(*e);
                    let wi = (p * (1.0 - p)).max(MIN_IRLS_WEIGHT);
                    w.push(wi);
                    residual.push((yi - p) / wi);
                }
                let (beta0, b0) = (beta.clone(), b);
                let mut q = Quadratic::new(x, st, w, residual);
                let budget = max_iter.saturating_sub(sweeps).max(1);
                let (used, inner_ok) = q.solve(&mut beta, &mut b, lambda, tol, budget);
                sweeps += used;
                let moved = beta.iter().zip(&beta0).map(|(a, c)| libm::fabs(a - c)).fold(libm::fabs(b - b0), f64::max);
                if inner_ok && moved < tol {
                    return Solution { beta, b, sweeps, converged: true };
                }
                if sweeps >= max_iter {
                    break;
                }
            }
            Solution { beta, b, sweeps, converged: false }
        }
    }
}

pub(crate) fn check_inputs(x: &CscMatrix, y: &[f64], link: Link) -> Result<()> {
    if y.is_empty() {
        return Err(Error::InsufficientData(String::from("no rows to fit")));
    }
    if x.n_rows() != y.len() {
        return Err(Error::InvalidParams(format!("{} rows but {} targets", x.n_rows(), y.len())));
    }
    if link == Link::Logistic && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidParams(String::from("logistic targets must be 0 or 1")));
    }
    Ok(())
}

pub(crate) fn check_params(p: &LinearParams) -> Result<()> {
    if !(p.l1_lambda >= 0.0 && p.l1_lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("l1_lambda must be finite and non-negative, got {}", p.l1_lambda)));
    }
    if !(p.tol > 0.0) || p.max_iter == 0 {
        return Err(Error::InvalidParams(String::from("tol must be positive and max_iter at least 1")));
    }
    Ok(())
}

/// Fits on sparse columns. A missed tolerance returns `NotConverged` carrying
/// the last iterate.
pub fn fit_linear_csc(x: &CscMatrix, y: &[f64], params: &LinearParams) -> Result<LinearModel> {
    check_params(params)?;
    check_inputs(x, y, params.link)?;
    let st = Standardization::compute(x);
    let sol = solve(x, y, &st, params.link, params.l1_lambda, params.max_iter, params.tol, None);
    let model = LinearModel::from_standardized(&sol.beta, sol.b, params.link, params.l1_lambda, &st);
    if sol.converged {
        Ok(model)
    } else {
        Err(Error::NotConverged { iterations: sol.sweeps, last: Box::new(model) })
    }
}

pub fn fit_linear(data: &DesignMatrix, params: &LinearParams) -> Result<LinearModel> {
    fit_linear_csc(&CscMatrix::from_design(data), data.target(), params)
}

/// Mean loss and its gradient with respect to raw weights and intercept:
/// half squared error for the identity link, logistic loss otherwise.
pub fn loss_and_gradient(x: &CscMatrix, y: &[f64], link: Link, weights: &[f64], intercept: f64) -> (f64, Vec<f64>, f64) {
    let n = y.len() as f64;
    let eta = x.scores(weights, intercept);
    let mut loss = 0.0;
    let mut resid = Vec::with_capacity(y.len());
    for (e, yi) in eta.iter().zip(y) {
        match link {
            Link::Identity => {
                loss += 0.5 * (e - yi) * (e - yi);
                resid.push(e - yi);
            }
            Link::Logistic => {
                loss += softplus(*e) - yi * e;
                resid.push(sigmoid(*e) - yi);
            }
        }
    }
    let grad = (0..x.n_cols())
        .map(|j| {
            let (rows, vals) = x.column(j);
            rows.iter().zip(vals).map(|(r, v)| resid[*r as usize] * v).sum::<f64>() / n
        })
        .collect();
    (loss / n, grad, resid.iter().sum::<f64>() / n)
}

/// Smallest λ at which every standardized coefficient is zero.
pub fn lambda_max(x: &CscMatrix, y: &[f64], link: Link) -> f64 {
    let st = Standardization::compute(x);
    let b = initial_intercept(y, link);
    let (_, grad, g0) = loss_and_gradient(x, y, link, &vec![0.0; x.n_cols()], b);
    grad.iter()
        .enumerate()
        .filter(|(j, _)| st.scales[*j] > 0.0)
        .map(|(j, g)| libm::fabs((g - st.means[j] * g0) / st.scales[j]))
        .fold(0.0, f64::max)
}

/// `n` geometric points from `lmax` down to `lmax * min_ratio`.
pub fn lambda_grid(lmax: f64, n: usize, min_ratio: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lmax],
        _ => (0..n).map(|k| lmax * libm::pow(min_ratio, k as f64 / (n - 1) as f64)).collect(),
    }
}

/// Solutions along a λ path fitted in descending order with warm starts;
/// output follows the input order of `lambdas`.
pub fn lasso_path(x: &CscMatrix, y: &[f64], params: &LinearParams, lambdas: &[f64]) -> Result<Vec<LinearModel>> {
    check_params(params)?;
    check_inputs(x, y, params.link)?;
    let st = Standardization::compute(x);
    let path = path_solutions(x, y, &st, params, lambdas);
    Ok(path.into_iter().map(|(l, s)| LinearModel::from_standardized(&s.beta, s.b, params.link, l, &st)).collect())
}

fn path_solutions(x: &CscMatrix, y: &[f64], st: &Standardization, params: &LinearParams, lambdas: &[f64]) -> Vec<(f64, Solution)> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut out: Vec<Option<(f64, Solution)>> = (0..lambdas.len()).map(|_| None).collect();
    let mut prev: Option<(Vec<f64>, f64)> = None;
    for k in order {
        let start = prev.as_ref().map(|(b, c)| (b.as_slice(), *c));
        let sol = solve(x, y, st, params.link, lambdas[k], params.max_iter, params.tol, start);
        prev = Some((sol.beta.clone(), sol.b));
        out[k] = Some((lambdas[k], sol));
    }
    out.into_iter().map(|s| s.expect("every λ solved")).collect()
}

/// Cross-validation outcome over a λ grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Mean held-out loss per λ under the fit's [`CvLoss`].
    pub losses: Vec<f64>,
    pub chosen: f64,
}

fn holdout_loss(p: &LinearParams, eta: f64, y: f64) -> f64 {
    match (p.cv_loss, p.link) {
        (CvLoss::Deviance, Link::Identity) => (eta - y) * (eta - y),
        (CvLoss::Deviance, Link::Logistic) => softplus(eta) - y * eta,
        (CvLoss::Absolute, Link::Identity) => libm::fabs(eta - y),
        (CvLoss::Absolute, Link::Logistic) => libm::fabs(sigmoid(eta) - y),
    }
}

pub(crate) fn select<T: Copy>(v: &[T], keep: &[bool]) -> Vec<T> {
    v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect()
}

/// Fold labels for `folds`-fold CV over `n` rows.
pub(crate) fn check_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidParams(format!("cannot run {folds}-fold CV on {n} rows")));
    }
    Ok(fold_assignment(n, folds, seed))
}

/// Summed held-out loss of each λ, fitting the path on the training part.
pub(crate) fn holdout_path_losses(
    xt: &CscMatrix,
    yt: &[f64],
    xh: &CscMatrix,
    yh: &[f64],
    params: &LinearParams,
    lambdas: &[f64],
) -> Vec<f64> {
    let st = Standardization::compute(xt);
    path_solutions(xt, yt, &st, params, lambdas)
        .into_iter()
        .map(|(l, sol)| {
            let m = LinearModel::from_standardized(&sol.beta, sol.b, params.link, l, &st);
            let eta = xh.scores(&m.weights, m.intercept);
            eta.iter().zip(yh).map(|(e, y)| holdout_loss(params, *e, *y)).sum()
        })
        .collect()
}

/// Minimum mean loss; ties go to the larger λ.
pub(crate) fn select_lambda(lambdas: &[f64], losses: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..lambdas.len() {
        if losses[i] < losses[best] || (losses[i] == losses[best] && lambdas[i] > lambdas[best]) {
            best = i;
        }
    }
    lambdas[best]
}

/// Fits at one λ; a missed tolerance keeps the last iterate.
pub(crate) fn fit_at(x: &CscMatrix, y: &[f64], params: &LinearParams, lambda: f64) -> Result<LinearModel> {
    match fit_linear_csc(x, y, &LinearParams { l1_lambda: lambda, ..*params }) {
        Ok(m) => Ok(m),
        Err(Error::NotConverged { last, .. }) => Ok(*last),
        Err(e) => Err(e),
    }
}

/// Chooses λ from `lambdas` by k-fold CV (minimum mean held-out loss, ties
/// to the larger λ), then refits on all rows at that λ from a cold start.
/// A single-point grid skips the CV.
pub fn fit_lasso_cv(
    x: &CscMatrix,
    y: &[f64],
    params: &LinearParams,
    lambdas: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(LinearModel, CvResult)> {
    check_params(params)?;
    check_inputs(x, y, params.link)?;
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidParams(String::from("λ grid must be non-empty, finite and non-negative")));
    }
    let mut losses = vec![0.0; lambdas.len()];
    let chosen = if lambdas.len() == 1 {
        lambdas[0]
    } else {
        let fold = check_folds(y.len(), folds, seed)?;
        for k in 0..folds {
            let keep: Vec<bool> = fold.iter().map(|&f| f != k).collect();
            let hold: Vec<bool> = keep.iter().map(|k| !k).collect();
            let (xt, yt) = (x.select_rows(&keep), select(y, &keep));
            let (xh, yh) = (x.select_rows(&hold), select(y, &hold));
            for (acc, l) in losses.iter_mut().zip(holdout_path_losses(&xt, &yt, &xh, &yh, params, lambdas)) {
                *acc += l;
            }
        }
        losses.iter_mut().for_each(|l| *l /= y.len() as f64);
        select_lambda(lambdas, &losses)
    };
    let model = fit_at(x, y, params, chosen)?;
    Ok((model, CvResult { lambdas: lambdas.to_vec(), losses, chosen }))
}
