use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "clf")]
    Classification,
    #[serde(rename = "reg")]
    Regression,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Classification => "clf",
            Task::Regression => "reg",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clf" | "classification" => Ok(Task::Classification),
            "reg" | "regression" => Ok(Task::Regression),
            _ => Err(Error::UnknownKey(String::from(s))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    /// Integer-valued category codes; trees split on equality sets.
    Categorical,
}

/// Row-major feature matrix with one target per row.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    values: Vec<f64>,
    kinds: Vec<FeatureKind>,
    names: Vec<String>,
    target: Vec<f64>,
}

impl DesignMatrix {
    /// Errors on a shape mismatch or any non-finite value.
    pub fn new(values: Vec<f64>, kinds: Vec<FeatureKind>, names: Vec<String>, target: Vec<f64>) -> Result<Self> {
        let d = kinds.len();
        if names.len() != d {
            return Err(Error::InvalidParams(format!("{} names for {} columns", names.len(), d)));
        }
        let n_rows = target.len();
        if values.len() != n_rows * d {
            return Err(Error::InvalidParams(format!(
                "{} values do not fill {} rows of {} columns",
                values.len(),
                n_rows,
                d
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(format!("non-finite feature at row {}, column {}", pos / d.max(1), pos % d.max(1))));
        }
        if let Some(pos) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(format!("non-finite target at row {pos}")));
        }
        Ok(DesignMatrix { n_rows, values, kinds, names, target })
    }

    /// All-numeric matrix from row vectors, columns named `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParams(String::from("ragged rows")));
        }
        let values = rows.iter().flatten().copied().collect();
        let names = (0..d).map(|j| format!("x{j}")).collect();
        Self::new(values, alloc::vec![FeatureKind::Numeric; d], names, target)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.kinds.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn with_target(mut self, target: Vec<f64>) -> Result<Self> {
        if target.len() != self.n_rows {
            return Err(Error::InvalidParams(format!("{} targets for {} rows", target.len(), self.n_rows)));
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(String::from("non-finite target")));
        }
        self.target = target;
        Ok(self)
    }

    /// Rows in the given order (repeats allowed).
    pub fn subset(&self, rows: &[usize]) -> DesignMatrix {
        let values = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        DesignMatrix {
            n_rows: rows.len(),
            values,
            kinds: self.kinds.clone(),
            names: self.names.clone(),
            target: rows.iter().map(|&i| self.target[i]).collect(),
        }
    }

    pub(crate) fn require_binary(&self) -> Result<()> {
        if self.target.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidParams(String::from("classification targets must be 0 or 1")));
        }
        Ok(())
    }

    pub(crate) fn check_width(&self, expected: usize) -> Result<()> {
        if self.n_cols() != expected {
            return Err(Error::LayoutMismatch { expected, found: self.n_cols() });
        }
        Ok(())
    }
}
