//! Feature records for an ordered (target, helper) pair.
//!
//! The target plays the cold user: nothing about its day-0 behavior enters
//! its features. The helper is active on day 0 and contributes its
//! individuality, computed against the day-0 population with the target left
//! out, so that the target's day-0 views cannot move any feature.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{CityId, Corpus, DayWindow, Gender, UserId};
use crate::error::{Error, Result};
use crate::profiling::{individuality_value, ptp_counts, tag_set, ProfileSet, SimKind, WindowStats};
use crate::rng::stream;

pub mod layout;

pub use layout::{Category, CategorySet, FeatureLayout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GenderPair {
    MM,
    MF,
    FF,
}

impl GenderPair {
    pub fn of(a: Gender, b: Gender) -> Self {
        match (a, b) {
            (Gender::Male, Gender::Male) => GenderPair::MM,
            (Gender::Female, Gender::Female) => GenderPair::FF,
            _ => GenderPair::MF,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [GenderPair::MM, GenderPair::MF, GenderPair::FF].get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GenderPair::MM => "MM",
            GenderPair::MF => "MF",
            GenderPair::FF => "FF",
        }
    }
}

impl fmt::Display for GenderPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GenderPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MM" => Ok(GenderPair::MM),
            "MF" | "FM" => Ok(GenderPair::MF),
            "FF" => Ok(GenderPair::FF),
            _ => Err(Error::InvalidRecord(alloc::format!("unknown gender pair `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub gender_pair: GenderPair,
    pub age_target: u32,
    pub age_helper: u32,
    pub city_target: CityId,
    pub city_helper: CityId,
    pub same_city: bool,
    pub friendship: bool,
    /// `|F_u ∩ F_v| / (sqrt|F_u| sqrt|F_v|)`, 0 when either has no friends.
    pub common_friend_ratio: f64,
    pub common_groups: u32,
    pub msg_count_month: u32,
    /// Distinct days with messages in `[-30, -1]`.
    pub msg_days_month: u32,
    pub past_sim_month: f64,
    pub has_past: bool,
    pub helper_individuality: f64,
    pub has_individuality: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub target: UserId,
    pub helper: UserId,
    pub features: FeatureRecord,
    /// Day-0 similarity; present for training pairs.
    pub label_sim: Option<f64>,
    pub kind: SimKind,
}

fn sorted_intersection<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Precomputed per-kind state for bulk extraction.
pub struct FeatureExtractor<'a> {
    corpus: &'a Corpus,
    kind: SimKind,
    past: ProfileSet,
    today: WindowStats,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(corpus: &'a Corpus, kind: SimKind) -> Self {
        let past_stats = (kind == SimKind::Rtp).then(|| WindowStats::compute(corpus, &DayWindow::PAST_MONTH));
        let past = ProfileSet::build_with(corpus, kind, &DayWindow::PAST_MONTH, past_stats.as_ref());
        let today = WindowStats::compute(corpus, &DayWindow::TODAY);
        FeatureExtractor { corpus, kind, past, today }
    }

    pub fn kind(&self) -> SimKind {
        self.kind
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    /// Dense-index variant of [`FeatureExtractor::extract`].
    pub fn extract_indices(&self, t: usize, h: usize) -> FeatureRecord {
        let c = self.corpus;
        let (ut, uh) = (c.user_at(t), c.user_at(h));
        let (ft, fh) = (c.friends_of(t), c.friends_of(h));
        let common_friend_ratio = if ft.is_empty() || fh.is_empty() {
            0.0
        } else {
            let r = sorted_intersection(ft, fh) as f64 / (libm::sqrt(ft.len() as f64) * libm::sqrt(fh.len() as f64));
            r.min(1.0)
        };
        let messages = c.messages_between(t, h);
        let has_past = !self.past.is_empty_profile(t) && !self.past.is_empty_profile(h);
        let (helper_individuality, has_individuality) = self.helper_individuality(t, h);
        FeatureRecord {
            gender_pair: GenderPair::of(ut.gender, uh.gender),
            age_target: ut.age,
            age_helper: uh.age,
            city_target: ut.city,
            city_helper: uh.city,
            same_city: ut.city == uh.city,
            friendship: c.are_friends(t, h),
            common_friend_ratio,
            common_groups: sorted_intersection(c.groups_of(t), c.groups_of(h)) as u32,
            msg_count_month: messages.iter().map(|&(_, n)| n).sum(),
            msg_days_month: messages.len() as u32,
            past_sim_month: if has_past { self.past.similarity(t, h) } else { 0.0 },
            has_past,
            helper_individuality,
            has_individuality,
        }
    }

    fn helper_individuality(&self, t: usize, h: usize) -> (f64, bool) {
        let c = self.corpus;
        let helper_videos = c.day_views(h, 0);
        if helper_videos.is_empty() {
            return (0.0, false);
        }
        let target_videos = c.day_views(t, 0);
        let target_active = !target_videos.is_empty();
        let value = match self.kind {
            SimKind::Vbp => {
                let base: Vec<(u32, f64)> = helper_videos.iter().map(|&m| (m, 1.0)).collect();
                let excluded = target_active.then_some(target_videos);
                individuality_value(&base, &self.today.video_owners, self.today.n_active, false, excluded)
            }
            SimKind::Ptp | SimKind::Rtp => {
                let base = ptp_counts(c, helper_videos);
                let excluded = target_active.then(|| tag_set(c, target_videos));
                individuality_value(
                    &base,
                    &self.today.tag_owners,
                    self.today.n_active,
                    self.kind == SimKind::Rtp,
                    excluded.as_deref(),
                )
            }
        };
        (value, true)
    }

    pub fn extract(&self, target: UserId, helper: UserId) -> Result<FeatureRecord> {
        let t = self.corpus.require_user(target)?;
        let h = self.corpus.require_user(helper)?;
        if t == h {
            return Err(Error::InvalidParams(String::from("target and helper must differ")));
        }
        Ok(self.extract_indices(t, h))
    }
}

/// One-off extraction; use [`FeatureExtractor`] for many pairs.
pub fn extract(c: &Corpus, target: UserId, helper: UserId, kind: SimKind) -> Result<FeatureRecord> {
    FeatureExtractor::new(c, kind).extract(target, helper)
}

/// Uniformly drawn ordered pairs of distinct day-0-active users, labelled with
/// their day-0 similarity of `kind`.
pub fn build_training_set(c: &Corpus, n_pairs: usize, kind: SimKind, seed: u64) -> Result<Vec<PairSample>> {
    let active = c.active_indices(&DayWindow::TODAY);
    if active.len() < 2 {
        return Err(Error::InsufficientData(alloc::format!(
            "{} day-0 active users; at least 2 are needed",
            active.len()
        )));
    }
    if n_pairs == 0 {
        return Ok(Vec::new());
    }
    let mut rng = stream(seed, "pairs");
    let pairs: Vec<(usize, usize)> = (0..n_pairs)
        .map(|_| {
            let a = rng.random_range(0..active.len());
            let mut b = rng.random_range(0..active.len() - 1);
            if b >= a {
                b += 1;
            }
            (active[a], active[b])
        })
        .collect();
    Ok(label_pairs(c, &pairs, kind))
}

/// Features and day-0 labels for explicit dense-index pairs.
pub fn label_pairs(c: &Corpus, pairs: &[(usize, usize)], kind: SimKind) -> Vec<PairSample> {
    let fx = FeatureExtractor::new(c, kind);
    let labels = ProfileSet::build(c, kind, &DayWindow::TODAY);
    pairs
        .iter()
        .map(|&(t, h)| PairSample {
            target: c.user_at(t).id,
            helper: c.user_at(h).id,
            features: fx.extract_indices(t, h),
            label_sim: Some(labels.similarity(t, h)),
            kind,
        })
        .collect()
}

/// Column names of the flat sample table, in order.
pub const SAMPLE_COLUMNS: [&str; 20] = [
    "target",
    "helper",
    "kind",
    "gender_pair",
    "age_target",
    "age_helper",
    "city_target",
    "city_helper",
    "same_city",
    "friendship",
    "common_friend_ratio",
    "common_groups",
    "msg_count_month",
    "msg_days_month",
    "past_sim_month",
    "has_past",
    "helper_individuality",
    "has_individuality",
    "label_sim",
    "has_label",
];

impl PairSample {
    pub fn kind_name(&self) -> String {
        self.kind.name().to_string()
    }
}
