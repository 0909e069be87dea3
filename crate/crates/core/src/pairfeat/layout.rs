//! Column layouts of feature records for tree and linear consumers.
//!
//! Trees read raw category codes (gender pair, both cities). Linear models
//! read indicator columns instead: gender pair against an MM baseline, and
//! one-hot columns for the most frequent cities in each role.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{FeatureRecord, GenderPair};
use crate::corpus::CityId;
use crate::error::{Error, Result};
use crate::mlcore::{DesignMatrix, FeatureKind};

pub const TOP_CITIES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Demographic,
    Social,
    Interest,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Demographic, Category::Social, Category::Interest];

    pub fn name(self) -> &'static str {
        match self {
            Category::Demographic => "demographic",
            Category::Social => "social",
            Category::Interest => "interest",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Non-empty subset of the three feature categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CategorySet(u8);

impl CategorySet {
    pub const ALL: CategorySet = CategorySet(0b111);

    pub fn of(categories: &[Category]) -> Result<Self> {
        let bits = categories.iter().fold(0, |b, c| b | c.bit());
        if bits == 0 {
            return Err(Error::InvalidParams(String::from("a feature set needs at least one category")));
        }
        Ok(CategorySet(bits))
    }

    pub fn contains(self, c: Category) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The seven non-empty subsets, singletons first, then pairs, then all.
    pub fn combinations() -> Vec<CategorySet> {
        let mut all: Vec<CategorySet> = (1u8..8).map(CategorySet).collect();
        all.sort_by_key(|s| (s.len(), s.0));
        all
    }

    pub fn is_proper_subset_of(self, other: CategorySet) -> bool {
        self != other && self.0 & other.0 == self.0
    }
}

impl fmt::Display for CategorySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Category::ALL.iter().filter(|c| self.contains(**c)).map(|c| c.name()).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for CategorySet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(CategorySet::ALL);
        }
        let cats = s
            .split('+')
            .map(|p| match p.trim() {
                "demographic" | "demo" => Ok(Category::Demographic),
                "social" => Ok(Category::Social),
                "interest" => Ok(Category::Interest),
                other => Err(Error::UnknownKey(String::from(other))),
            })
            .collect::<Result<Vec<_>>>()?;
        CategorySet::of(&cats)
    }
}

impl TryFrom<String> for CategorySet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CategorySet> for String {
    fn from(s: CategorySet) -> String {
        format!("{s}")
    }
}

/// Column layout fitted on training records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub categories: CategorySet,
    /// Cities with their own one-hot column in the linear layout, by frequency.
    pub top_cities: Vec<CityId>,
}

fn b(v: bool) -> f64 {
    f64::from(u8::from(v))
}

impl FeatureLayout {
    /// Picks the [`TOP_CITIES`] most frequent cities over both roles (ties to
    /// the lower id).
    pub fn fit(records: &[FeatureRecord], categories: CategorySet) -> Self {
        let mut counts: BTreeMap<CityId, usize> = BTreeMap::new();
        for r in records {
            *counts.entry(r.city_target).or_default() += 1;
            *counts.entry(r.city_helper).or_default() += 1;
        }
        let mut ranked: Vec<(CityId, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let top_cities = if categories.contains(Category::Demographic) {
            ranked.into_iter().take(TOP_CITIES).map(|(c, _)| c).collect()
        } else {
            Vec::new()
        };
        FeatureLayout { categories, top_cities }
    }

    pub fn tree_columns(&self) -> Vec<(String, FeatureKind)> {
        use FeatureKind::{Categorical, Numeric};
        let mut out = Vec::new();
        let mut add = |name: &str, kind| out.push((String::from(name), kind));
        if self.categories.contains(Category::Demographic) {
            add("gender_pair", Categorical);
            add("age_target", Numeric);
            add("age_helper", Numeric);
            // Raw ids split as ordered codes: equality-set splits over
            // target and helper city overfit and survive pruning.
            add("city_target", Numeric);
            add("city_helper", Numeric);
            add("same_city", Numeric);
        }
        if self.categories.contains(Category::Social) {
            for n in ["friendship", "common_friend_ratio", "common_groups", "msg_count_month", "msg_days_month"] {
                add(n, Numeric);
            }
        }
        if self.categories.contains(Category::Interest) {
            for n in ["past_sim_month", "has_past", "helper_individuality", "has_individuality"] {
                add(n, Numeric);
            }
        }
        out
    }

    pub fn linear_columns(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        if self.categories.contains(Category::Demographic) {
            for n in ["gender_mf", "gender_ff", "age_target", "age_helper", "same_city"] {
                out.push(String::from(n));
            }
            for role in ["target", "helper"] {
                for c in &self.top_cities {
                    out.push(format!("city_{role}_{c}"));
                }
            }
        }
        if self.categories.contains(Category::Social) {
            for n in ["friendship", "common_friend_ratio", "common_groups", "msg_count_month", "msg_days_month"] {
                out.push(String::from(n));
            }
        }
        if self.categories.contains(Category::Interest) {
            for n in ["past_sim_month", "has_past", "helper_individuality", "has_individuality"] {
                out.push(String::from(n));
            }
        }
        out
    }

    fn push_social(r: &FeatureRecord, out: &mut Vec<f64>) {
        out.extend([
            b(r.friendship),
            r.common_friend_ratio,
            f64::from(r.common_groups),
            f64::from(r.msg_count_month),
            f64::from(r.msg_days_month),
        ]);
    }

    fn push_interest(r: &FeatureRecord, out: &mut Vec<f64>) {
        out.extend([r.past_sim_month, b(r.has_past), r.helper_individuality, b(r.has_individuality)]);
    }

    pub fn tree_row(&self, r: &FeatureRecord, out: &mut Vec<f64>) {
        if self.categories.contains(Category::Demographic) {
            out.extend([
                f64::from(r.gender_pair.code()),
                f64::from(r.age_target),
                f64::from(r.age_helper),
                f64::from(r.city_target.0),
                f64::from(r.city_helper.0),
                b(r.same_city),
            ]);
        }
        if self.categories.contains(Category::Social) {
            Self::push_social(r, out);
        }
        if self.categories.contains(Category::Interest) {
            Self::push_interest(r, out);
        }
    }

    pub fn linear_row(&self, r: &FeatureRecord, out: &mut Vec<f64>) {
        if self.categories.contains(Category::Demographic) {
            out.extend([
                b(r.gender_pair == GenderPair::MF),
                b(r.gender_pair == GenderPair::FF),
                f64::from(r.age_target),
                f64::from(r.age_helper),
                b(r.same_city),
            ]);
            for city in [r.city_target, r.city_helper] {
                out.extend(self.top_cities.iter().map(|c| b(*c == city)));
            }
        }
        if self.categories.contains(Category::Social) {
            Self::push_social(r, out);
        }
        if self.categories.contains(Category::Interest) {
            Self::push_interest(r, out);
        }
    }

    pub fn tree_matrix(&self, records: &[FeatureRecord], target: Vec<f64>) -> Result<DesignMatrix> {
        let cols = self.tree_columns();
        let mut values = Vec::with_capacity(records.len() * cols.len());
        records.iter().for_each(|r| self.tree_row(r, &mut values));
        let (names, kinds) = cols.into_iter().unzip();
        DesignMatrix::new(values, kinds, names, target)
    }

    pub fn linear_matrix(&self, records: &[FeatureRecord], target: Vec<f64>) -> Result<DesignMatrix> {
        let names = self.linear_columns();
        let mut values = Vec::with_capacity(records.len() * names.len());
        records.iter().for_each(|r| self.linear_row(r, &mut values));
        let kinds = alloc::vec![FeatureKind::Numeric; names.len()];
        DesignMatrix::new(values, kinds, names, target)
    }
}
