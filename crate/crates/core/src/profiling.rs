//! Tag-based and video-based interest profiles.
//!
//! A popular-tag profile (PTP) weights each tag by the number of distinct
//! videos carrying it that the user viewed in a window. A representative-tag
//! profile (RTP) damps each PTP weight by `log2(|U| / |U_i|)`, where `|U|` is
//! the number of users active in the window and `|U_i|` the number of those
//! users whose window tag set contains tag `i`. A video-based profile (VBP)
//! is the plain set of viewed videos.
//!
//! Similarity is cosine in every case; an empty profile has similarity 0 with
//! everything.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DayWindow, TagId, UserId, VideoId};
use crate::error::{Error, Result};

/// Sparse vector over dense tag or video indexes, ascending by index.
pub type SparseVec = Vec<(u32, f64)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Ptp,
    Rtp,
}

impl ProfileKind {
    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Ptp => "ptp",
            ProfileKind::Rtp => "rtp",
        }
    }
}

/// Profile used for a similarity target: one of the tag kinds or video based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    Ptp,
    Rtp,
    Vbp,
}

impl SimKind {
    pub const ALL: [SimKind; 3] = [SimKind::Ptp, SimKind::Rtp, SimKind::Vbp];

    pub fn name(self) -> &'static str {
        match self {
            SimKind::Ptp => "ptp",
            SimKind::Rtp => "rtp",
            SimKind::Vbp => "vbp",
        }
    }

    pub fn tag_kind(self) -> Option<ProfileKind> {
        match self {
            SimKind::Ptp => Some(ProfileKind::Ptp),
            SimKind::Rtp => Some(ProfileKind::Rtp),
            SimKind::Vbp => None,
        }
    }
}

impl From<ProfileKind> for SimKind {
    fn from(k: ProfileKind) -> Self {
        match k {
            ProfileKind::Ptp => SimKind::Ptp,
            ProfileKind::Rtp => SimKind::Rtp,
        }
    }
}

impl fmt::Display for SimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ptp" => Ok(SimKind::Ptp),
            "rtp" => Ok(SimKind::Rtp),
            "vbp" => Ok(SimKind::Vbp),
            _ => Err(Error::UnknownKey(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagProfile {
    pub owner: UserId,
    pub window: DayWindow,
    pub kind: ProfileKind,
    /// Strictly positive weights, ascending by tag id.
    pub weights: Vec<(TagId, f64)>,
}

impl TagProfile {
    pub fn get(&self, tag: TagId) -> Option<f64> {
        self.weights.binary_search_by_key(&tag, |(t, _)| *t).ok().map(|i| self.weights[i].1)
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.weights.iter().map(|(_, w)| w * w).sum())
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> TagProfile {
        TagProfile { weights: self.weights.iter().map(|&(t, w)| (t, w * factor)).collect(), ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoProfile {
    pub owner: UserId,
    pub window: DayWindow,
    pub videos: Vec<VideoId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individuality {
    pub user: UserId,
    pub kind: ProfileKind,
    pub value: f64,
}

/// Population statistics of one window: active users, and for every tag and
/// video the number of active users owning it.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowStats {
    pub window: DayWindow,
    pub n_active: u32,
    /// `|U_i|` by dense tag index.
    pub tag_owners: Vec<u32>,
    /// Number of active users who viewed each video, by dense video index.
    pub video_owners: Vec<u32>,
}

impl WindowStats {
    pub fn compute(c: &Corpus, window: &DayWindow) -> Self {
        let mut tag_owners = vec![0u32; c.n_tags()];
        let mut video_owners = vec![0u32; c.n_videos()];
        let mut n_active = 0;
        for u in 0..c.n_users() {
            let videos = c.window_views(u, window);
            if videos.is_empty() {
                continue;
            }
            n_active += 1;
            for &m in &videos {
                video_owners[m as usize] += 1;
            }
            for t in tag_set(c, &videos) {
                tag_owners[t as usize] += 1;
            }
        }
        WindowStats { window: *window, n_active, tag_owners, video_owners }
    }

    pub fn tag_owner_count(&self, c: &Corpus, tag: TagId) -> u32 {
        c.tag_index(tag).map(|i| self.tag_owners[i]).unwrap_or(0)
    }
}

/// Dense tag indexes carried by a set of videos, ascending and deduplicated.
pub(crate) fn tag_set(c: &Corpus, videos: &[u32]) -> Vec<u32> {
    let mut tags: Vec<u32> = videos.iter().flat_map(|&m| c.video_tag_indices(m as usize).iter().copied()).collect();
    tags.sort_unstable();
    tags.dedup();
    tags
}

/// PTP counts over dense tag indexes for a set of viewed videos.
pub(crate) fn ptp_counts(c: &Corpus, videos: &[u32]) -> SparseVec {
    let mut tags: Vec<u32> = videos.iter().flat_map(|&m| c.video_tag_indices(m as usize).iter().copied()).collect();
    tags.sort_unstable();
    let mut out: SparseVec = Vec::new();
    for t in tags {
        match out.last_mut() {
            Some((last, w)) if *last == t => *w += 1.0,
            _ => out.push((t, 1.0)),
        }
    }
    out
}

fn rtp_factor(n_active: u32, owners: u32) -> f64 {
    libm::log2(f64::from(n_active) / f64::from(owners))
}

/// Applies the RTP damping to PTP counts; exact-zero weights are dropped.
pub(crate) fn rtp_from_ptp(ptp: &SparseVec, stats: &WindowStats) -> SparseVec {
    ptp.iter()
        .filter_map(|&(t, w)| {
            let weight = w * rtp_factor(stats.n_active, stats.tag_owners[t as usize]);
            (weight > 0.0).then_some((t, weight))
        })
        .collect()
}

pub(crate) fn sparse_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

pub(crate) fn sparse_norm(a: &[(u32, f64)]) -> f64 {
    libm::sqrt(a.iter().map(|(_, w)| w * w).sum())
}

pub(crate) fn cosine_with_norms(a: &[(u32, f64)], na: f64, b: &[(u32, f64)], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (sparse_dot(a, b) / (na * nb)).clamp(0.0, 1.0)
}

fn to_profile(c: &Corpus, owner: UserId, window: DayWindow, kind: ProfileKind, v: SparseVec) -> TagProfile {
    TagProfile { owner, window, kind, weights: v.into_iter().map(|(t, w)| (c.tag_at(t as usize), w)).collect() }
}

pub fn build_ptp(c: &Corpus, user: UserId, window: &DayWindow) -> Result<TagProfile> {
    let u = c.require_user(user)?;
    let counts = ptp_counts(c, &c.window_views(u, window));
    Ok(to_profile(c, user, *window, ProfileKind::Ptp, counts))
}

/// Builds an RTP profile; population statistics are computed over the same window.
pub fn build_rtp(c: &Corpus, user: UserId, window: &DayWindow) -> Result<TagProfile> {
    build_rtp_with(c, &WindowStats::compute(c, window), user)
}

pub fn build_rtp_with(c: &Corpus, stats: &WindowStats, user: UserId) -> Result<TagProfile> {
    let u = c.require_user(user)?;
    let counts = ptp_counts(c, &c.window_views(u, &stats.window));
    Ok(to_profile(c, user, stats.window, ProfileKind::Rtp, rtp_from_ptp(&counts, stats)))
}

pub fn build_video_profile(c: &Corpus, user: UserId, window: &DayWindow) -> Result<VideoProfile> {
    Ok(VideoProfile { owner: user, window: *window, videos: c.viewed_videos(user, window)? })
}

/// Cosine similarity of two tag profiles of the same kind. Windows may differ.
pub fn tag_similarity(p: &TagProfile, q: &TagProfile) -> Result<f64> {
    if p.kind != q.kind {
        return Err(Error::KindMismatch(p.kind.name(), q.kind.name()));
    }
    let (np, nq) = (p.norm(), q.norm());
    if np == 0.0 || nq == 0.0 {
        return Ok(0.0);
    }
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < p.weights.len() && j < q.weights.len() {
        match p.weights[i].0.cmp(&q.weights[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                dot += p.weights[i].1 * q.weights[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok((dot / (np * nq)).clamp(0.0, 1.0))
}

pub(crate) fn set_cosine(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    (common as f64 / (libm::sqrt(a.len() as f64) * libm::sqrt(b.len() as f64))).min(1.0)
}

/// `|I_u ∩ I_v| / (sqrt|I_u| sqrt|I_v|)` over the window's view sets.
pub fn video_similarity(c: &Corpus, u: UserId, v: UserId, window: &DayWindow) -> Result<f64> {
    let (a, b) = (c.require_user(u)?, c.require_user(v)?);
    Ok(set_cosine(&c.window_views(a, window), &c.window_views(b, window)))
}

/// Individuality of a profile with `base` PTP counts (or unit video weights
/// for VBP), given population owner counts.
///
/// `excluded` removes one active user from the population: `n_active` drops
/// by one and every owner count of an item in `excluded` drops by one.
pub(crate) fn individuality_value(
    base: &[(u32, f64)],
    owners: &[u32],
    n_active: u32,
    rtp: bool,
    excluded: Option<&[u32]>,
) -> f64 {
    if base.is_empty() {
        return 0.0;
    }
    let n = n_active - u32::from(excluded.is_some());
    if n == 0 {
        return 0.0;
    }
    let mut ex = excluded.unwrap_or(&[]).iter().peekable();
    let (mut num, mut norm2) = (0.0, 0.0);
    for &(i, w) in base {
        while ex.next_if(|&&e| e < i).is_some() {}
        let mut o = owners[i as usize];
        if ex.next_if(|&&e| e == i).is_some() {
            o -= 1;
        }
        let weight = if rtp { w * rtp_factor(n, o) } else { w };
        num += weight * f64::from(o);
        norm2 += weight * weight;
    }
    if norm2 == 0.0 {
        return 0.0;
    }
    num / (libm::sqrt(norm2) * f64::from(n))
}

/// Individuality `Σ_i w_i |U_i| / (‖w‖ |U|)` of a user's profile in `window`.
///
/// The value is 0 for an empty profile. It is bounded by `sqrt(|T_u|)`, and
/// equals 1 for a single tag owned by every active user.
pub fn individuality(c: &Corpus, user: UserId, kind: ProfileKind, window: &DayWindow) -> Result<Individuality> {
    let u = c.require_user(user)?;
    let stats = WindowStats::compute(c, window);
    let counts = ptp_counts(c, &c.window_views(u, window));
    let value = individuality_value(&counts, &stats.tag_owners, stats.n_active, kind == ProfileKind::Rtp, None);
    Ok(Individuality { user, kind, value })
}

/// Precomputed profiles of every user in one window, for bulk similarity work.
#[derive(Clone, Debug)]
pub struct ProfileSet {
    pub kind: SimKind,
    pub window: DayWindow,
    vectors: Vec<SparseVec>,
    norms: Vec<f64>,
}

impl ProfileSet {
    pub fn build(c: &Corpus, kind: SimKind, window: &DayWindow) -> Self {
        let stats = (kind == SimKind::Rtp).then(|| WindowStats::compute(c, window));
        Self::build_with(c, kind, window, stats.as_ref())
    }

    /// `stats` is required for RTP and must belong to `window`.
    pub fn build_with(c: &Corpus, kind: SimKind, window: &DayWindow, stats: Option<&WindowStats>) -> Self {
        let vectors: Vec<SparseVec> = (0..c.n_users())
            .map(|u| {
                let videos = c.window_views(u, window);
                match kind {
                    SimKind::Ptp => ptp_counts(c, &videos),
                    SimKind::Rtp => {
                        let stats = stats.expect("RTP profile set needs window statistics");
                        debug_assert_eq!(stats.window, *window);
                        rtp_from_ptp(&ptp_counts(c, &videos), stats)
                    }
                    SimKind::Vbp => videos.into_iter().map(|m| (m, 1.0)).collect(),
                }
            })
            .collect();
        let norms = vectors.iter().map(|v| sparse_norm(v)).collect();
        ProfileSet { kind, window: *window, vectors, norms }
    }

    pub fn vector(&self, user: usize) -> &[(u32, f64)] {
        &self.vectors[user]
    }

    pub fn is_empty_profile(&self, user: usize) -> bool {
        self.vectors[user].is_empty()
    }

    /// Cosine similarity between two users' profiles (dense user indexes).
    pub fn similarity(&self, u: usize, v: usize) -> f64 {
        cosine_with_norms(&self.vectors[u], self.norms[u], &self.vectors[v], self.norms[v])
    }

    /// Cosine similarity against a profile from a different set (another window).
    pub fn similarity_across(&self, u: usize, other: &ProfileSet, v: usize) -> f64 {
        cosine_with_norms(&self.vectors[u], self.norms[u], &other.vectors[v], other.norms[v])
    }
}

/// Cosine between the day-0 profile and the profile of day `-lag` for each
/// requested lag. `None` marks a lag day on which the user was inactive.
///
/// The user must be active on day 0. RTP profiles use the statistics of their
/// own day.
pub fn self_similarity_series(c: &Corpus, user: UserId, kind: ProfileKind, lags: &[u32]) -> Result<Vec<Option<f64>>> {
    let u = c.require_user(user)?;
    if !c.is_active(u, &DayWindow::TODAY) {
        return Err(Error::InsufficientData("user is not active on day 0".to_string()));
    }
    let profile_on = |day: i32| -> Result<TagProfile> {
        let w = DayWindow::single(day)?;
        match kind {
            ProfileKind::Ptp => build_ptp(c, user, &w),
            ProfileKind::Rtp => build_rtp(c, user, &w),
        }
    };
    let today = profile_on(0)?;
    lags.iter()
        .map(|&lag| {
            let day = -(lag as i32);
            let w = DayWindow::single(day)?;
            if !c.is_active(u, &w) {
                return Ok(None);
            }
            let past = profile_on(day)?;
            tag_similarity(&today, &past).map(Some)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AgeFilter, CityId, CorpusParts, Gender, UserRecord, VideoRecord, ViewEvent};

    fn corpus(users: u32, videos: &[&[u32]], views: &[(u32, u32, i32)]) -> Corpus {
        let parts = CorpusParts {
            users: (0..users).map(|i| UserRecord { id: UserId(i), gender: Gender::Female, age: 20, city: CityId(0) }).collect(),
            videos: videos
                .iter()
                .enumerate()
                .map(|(i, t)| VideoRecord { id: VideoId(i as u32), tags: t.iter().map(|&x| TagId(x)).collect() })
                .collect(),
            views: views.iter().map(|&(u, m, d)| ViewEvent { user: UserId(u), video: VideoId(m), day: d }).collect(),
            ..Default::default()
        };
        Corpus::build(parts, AgeFilter::default()).unwrap().0
    }

    fn profile(kind: ProfileKind, w: &[(u32, f64)]) -> TagProfile {
        TagProfile { owner: UserId(0), window: DayWindow::TODAY, kind, weights: w.iter().map(|&(t, x)| (TagId(t), x)).collect() }
    }

    #[test]
    fn ptp_counts_videos_per_tag() {
        let c = corpus(1, &[&[1, 2], &[2, 3]], &[(0, 0, 0), (0, 1, 0)]);
        let p = build_ptp(&c, UserId(0), &DayWindow::TODAY).unwrap();
        assert_eq!(p.weights, vec![(TagId(1), 1.0), (TagId(2), 2.0), (TagId(3), 1.0)]);
        let empty = build_ptp(&c, UserId(0), &DayWindow::PAST_MONTH).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn rtp_hand_example() {
        // |U| = 4; t1 owned by user 0 only, t2 owned by everyone.
        let c = corpus(4, &[&[1, 2], &[2], &[2]], &[(0, 0, 0), (0, 1, 0), (0, 2, 0), (1, 1, 0), (2, 1, 0), (3, 2, 0)]);
        let ptp = build_ptp(&c, UserId(0), &DayWindow::TODAY).unwrap();
        assert_eq!(ptp.weights, vec![(TagId(1), 1.0), (TagId(2), 3.0)]);
        let rtp = build_rtp(&c, UserId(0), &DayWindow::TODAY).unwrap();
        // t2 has factor log2(4/4) = 0 and is dropped; t1 gets 1 * log2(4/1) = 2.
        assert_eq!(rtp.weights, vec![(TagId(1), 2.0)]);
        let others = build_rtp(&c, UserId(1), &DayWindow::TODAY).unwrap();
        assert!(others.is_empty());
    }

    #[test]
    fn cosine_hand_example() {
        let p = profile(ProfileKind::Ptp, &[(1, 1.0), (2, 2.0)]);
        let q = profile(ProfileKind::Ptp, &[(2, 1.0), (3, 1.0)]);
        let s = tag_similarity(&p, &q).unwrap();
        assert!((s - 2.0 / libm::sqrt(10.0)).abs() < 1e-12);
        assert!((tag_similarity(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        let disjoint = profile(ProfileKind::Ptp, &[(9, 4.0)]);
        assert_eq!(tag_similarity(&p, &disjoint).unwrap(), 0.0);
        let r = profile(ProfileKind::Rtp, &[(1, 1.0)]);
        assert!(matches!(tag_similarity(&p, &r), Err(Error::KindMismatch(..))));
    }

    #[test]
    fn video_similarity_hand_example() {
        let c = corpus(3, &[&[1], &[1], &[1]], &[(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 2, 0)]);
        let s = video_similarity(&c, UserId(0), UserId(1), &DayWindow::TODAY).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        assert_eq!(video_similarity(&c, UserId(0), UserId(2), &DayWindow::TODAY).unwrap(), 0.0);
        assert!((video_similarity(&c, UserId(0), UserId(0), &DayWindow::TODAY).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn individuality_examples() {
        // Single tag owned by every active user -> 1.
        let c = corpus(2, &[&[5]], &[(0, 0, 0), (1, 0, 0)]);
        let h = individuality(&c, UserId(0), ProfileKind::Ptp, &DayWindow::TODAY).unwrap();
        assert!((h.value - 1.0).abs() < 1e-12);
        // Profile {t1: 3}, |U_t1| = |U| / 2 -> 0.5.
        let c = corpus(4, &[&[1], &[1], &[1], &[2]], &[(0, 0, 0), (0, 1, 0), (0, 2, 0), (1, 0, 0), (2, 3, 0), (3, 3, 0)]);
        let h = individuality(&c, UserId(0), ProfileKind::Ptp, &DayWindow::TODAY).unwrap();
        assert!((h.value - 0.5).abs() < 1e-12);
        let none = individuality(&c, UserId(0), ProfileKind::Ptp, &DayWindow::PAST_DAY).unwrap();
        assert_eq!(none.value, 0.0);
    }

    #[test]
    fn individuality_excluding_matches_rebuilt_population() {
        // Removing user 1 from a population must equal computing without user 1's views.
        let with = corpus(3, &[&[1, 2], &[2], &[3]], &[(0, 0, 0), (1, 1, 0), (1, 2, 0), (2, 1, 0)]);
        let without = corpus(3, &[&[1, 2], &[2], &[3]], &[(0, 0, 0), (2, 1, 0)]);
        let stats = WindowStats::compute(&with, &DayWindow::TODAY);
        let target_tags = tag_set(&with, &with.window_views(1, &DayWindow::TODAY));
        let base = ptp_counts(&with, &with.window_views(0, &DayWindow::TODAY));
        for rtp in [false, true] {
            let got = individuality_value(&base, &stats.tag_owners, stats.n_active, rtp, Some(&target_tags));
            let s2 = WindowStats::compute(&without, &DayWindow::TODAY);
            let want = individuality_value(&base, &s2.tag_owners, s2.n_active, rtp, None);
            assert!((got - want).abs() < 1e-12, "rtp={rtp}: {got} vs {want}");
        }
    }

    #[test]
    fn self_similarity_lag_zero_is_one() {
        let c = corpus(1, &[&[1, 2], &[3]], &[(0, 0, 0), (0, 0, -1), (0, 1, -2)]);
        let s = self_similarity_series(&c, UserId(0), ProfileKind::Ptp, &[0, 1, 2, 3]).unwrap();
        assert!((s[0].unwrap() - 1.0).abs() < 1e-12);
        assert!((s[1].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s[2], Some(0.0));
        assert_eq!(s[3], None);
    }
}
