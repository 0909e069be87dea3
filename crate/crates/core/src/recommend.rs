//! Cold-start top-N recommendation: neighbour selection, list building and
//! accuracy/diversity scoring.
//!
//! Targets are day-0-active users whose day-0 views are the ground truth. No
//! neighbour score reads a target's day-0 data.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DayWindow, UserId, VideoId};
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::pairfeat::FeatureExtractor;
use crate::profiling::{ProfileSet, SimKind};
use crate::rng::{indexed_stream, stream};

/// How neighbours are chosen among a target's candidates.
#[derive(Clone, Copy, Debug)]
pub enum Strategy<'a> {
    /// Scores from a trained model on pair features.
    PredictedSim { kind: SimKind, model: &'a Predictor },
    /// True day-0 similarity; an upper reference, not a cold-start method.
    OracleSim(SimKind),
    /// `[gender match] + [same city] + (1 - |Δage| / 30)`.
    DemographicSim,
    /// Friends only, by distinct messaging days.
    FriendFilter,
    /// Similarity of the past month's profiles.
    PastLongTerm(SimKind),
    RandomK,
    /// Every candidate; the list is the pool's most viewed videos.
    GlobalPopularity,
}

impl Strategy<'_> {
    pub fn name(&self) -> String {
        match self {
            Strategy::PredictedSim { kind, .. } => format!("predicted-{}", kind.name()),
            Strategy::OracleSim(kind) => format!("oracle-{}", kind.name()),
            Strategy::DemographicSim => String::from("demo"),
            Strategy::FriendFilter => String::from("friends"),
            Strategy::PastLongTerm(kind) => format!("past-{}", kind.name()),
            Strategy::RandomK => String::from("random"),
            Strategy::GlobalPopularity => String::from("popular"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_targets: usize,
    /// Randomly drawn day-0-active candidates per target; friends are added.
    pub n_candidates: usize,
    pub ks: Vec<usize>,
    pub ns: Vec<usize>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { n_targets: 2000, n_candidates: 5000, ks: vec![15], ns: (1..=10).map(|i| 10 * i).collect(), seed: 0 }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ns.is_empty() || self.ks.contains(&0) || self.ns.contains(&0) {
            return Err(Error::InvalidParams(String::from("K and N grids must be non-empty and positive")));
        }
        if self.n_targets == 0 || self.n_candidates == 0 {
            return Err(Error::InvalidParams(String::from("n_targets and n_candidates must be positive")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub target: UserId,
    pub videos: Vec<VideoId>,
}

enum Scorer<'a> {
    Predicted(FeatureExtractor<'a>, &'a Predictor),
    Profiles(ProfileSet),
    Demographic,
    Friends,
    Random(u64),
    Popular,
}

impl<'a> Scorer<'a> {
    fn new(c: &'a Corpus, strategy: &Strategy<'a>, seed: u64) -> Self {
        match *strategy {
            Strategy::PredictedSim { kind, model } => Scorer::Predicted(FeatureExtractor::new(c, kind), model),
            Strategy::OracleSim(kind) => Scorer::Profiles(ProfileSet::build(c, kind, &DayWindow::TODAY)),
            Strategy::PastLongTerm(kind) => Scorer::Profiles(ProfileSet::build(c, kind, &DayWindow::PAST_MONTH)),
            Strategy::DemographicSim => Scorer::Demographic,
            Strategy::FriendFilter => Scorer::Friends,
            Strategy::RandomK => Scorer::Random(seed),
            Strategy::GlobalPopularity => Scorer::Popular,
        }
    }

    /// Candidates in neighbour order, truncated to `k`. Dense index order is
    /// user id order, so index ties break by ascending id.
    fn rank(&self, c: &Corpus, t: usize, candidates: &[usize], k: usize) -> Vec<usize> {
        let by_score = |score: &dyn Fn(usize) -> f64, pool: &[usize]| -> Vec<usize> {
            let mut scored: Vec<(f64, usize)> = pool.iter().map(|&h| (score(h), h)).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            scored.into_iter().take(k).map(|(_, h)| h).collect()
        };
        match self {
            Scorer::Predicted(fx, model) => by_score(&|h| model.predict_record(&fx.extract_indices(t, h)), candidates),
            Scorer::Profiles(p) => by_score(&|h| p.similarity(t, h), candidates),
            Scorer::Demographic => {
                let ut = c.user_at(t);
                by_score(
                    &|h| {
                        let uh = c.user_at(h);
                        let age = 1.0 - f64::from(ut.age.abs_diff(uh.age)) / 30.0;
                        f64::from(u8::from(ut.gender == uh.gender)) + f64::from(u8::from(ut.city == uh.city)) + age
                    },
                    candidates,
                )
            }
            Scorer::Friends => {
                let friends: Vec<usize> = candidates.iter().copied().filter(|&h| c.are_friends(t, h)).collect();
                by_score(&|h| c.messages_between(t, h).len() as f64, &friends)
            }
            Scorer::Random(seed) => {
                let mut rng = indexed_stream(*seed, "random-k", t as u64);
                let m = k.min(candidates.len());
                index::sample(&mut rng, candidates.len(), m).into_iter().map(|i| candidates[i]).collect()
            }
            Scorer::Popular => candidates.to_vec(),
        }
    }
}

/// Videos (dense indexes) ranked by day-0 view count among `neighbors`, ties
/// by ascending id, truncated at `n`.
fn top_videos(c: &Corpus, neighbors: &[usize], n: usize, counts: &mut Vec<u32>) -> Vec<u32> {
    counts.clear();
    counts.resize(c.n_videos(), 0);
    let mut seen: Vec<u32> = Vec::new();
    for &h in neighbors {
        for &m in c.day_views(h, 0) {
            if counts[m as usize] == 0 {
                seen.push(m);
            }
            counts[m as usize] += 1;
        }
    }
    seen.sort_unstable_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
    seen.truncate(n);
    seen
}

/// Top-`k` neighbours of `target` among `candidates` under `strategy`.
/// `RandomK` draws from `seed`; `GlobalPopularity` returns every candidate.
pub fn select_neighbors(
    c: &Corpus,
    target: UserId,
    candidates: &[UserId],
    strategy: &Strategy<'_>,
    k: usize,
    seed: u64,
) -> Result<Vec<UserId>> {
    if candidates.is_empty() {
        return Err(Error::InsufficientData(String::from("no candidate neighbours")));
    }
    let t = c.require_user(target)?;
    let mut cand: Vec<usize> = candidates.iter().map(|&u| c.require_user(u)).collect::<Result<_>>()?;
    cand.sort_unstable();
    cand.dedup();
    if cand.binary_search(&t).is_ok() {
        return Err(Error::InvalidParams(String::from("candidates must exclude the target")));
    }
    let scorer = Scorer::new(c, strategy, seed);
    Ok(scorer.rank(c, t, &cand, k).into_iter().map(|h| c.user_at(h).id).collect())
}

/// The `n` videos most viewed on day 0 by `neighbors`.
pub fn recommend_topn(c: &Corpus, target: UserId, neighbors: &[UserId], n: usize) -> Result<RecommendationList> {
    let mut idx: Vec<usize> = neighbors.iter().map(|&u| c.require_user(u)).collect::<Result<_>>()?;
    idx.sort_unstable();
    idx.dedup();
    let videos = top_videos(c, &idx, n, &mut Vec::new()).into_iter().map(|m| c.video_at(m as usize).id).collect();
    Ok(RecommendationList { target, videos })
}

/// Pooled precision, recall and F over `(list, truth)` pairs of sorted or
/// unsorted distinct ids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl Accuracy {
    pub fn from_counts(hits: usize, recommended: usize, relevant: usize) -> Self {
        let precision = if recommended == 0 { 0.0 } else { hits as f64 / recommended as f64 };
        let recall = if relevant == 0 { 0.0 } else { hits as f64 / relevant as f64 };
        let f_measure = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Accuracy { precision, recall, f_measure }
    }
}

fn overlap<T: Ord>(list: &[T], truth: &[T]) -> usize {
    list.iter().filter(|m| truth.contains(m)).count()
}

pub fn accuracy(lists: &[Vec<VideoId>], truth: &[Vec<VideoId>]) -> Accuracy {
    let hits = lists.iter().zip(truth).map(|(l, t)| overlap(l, t)).sum();
    Accuracy::from_counts(hits, lists.iter().map(Vec::len).sum(), truth.iter().map(Vec::len).sum())
}

/// Micro-averaged F-measure of `lists` against per-target truth sets.
pub fn f_measure(lists: &[Vec<VideoId>], truth: &[Vec<VideoId>]) -> f64 {
    accuracy(lists, truth).f_measure
}

/// `1 - 2 Σ_{u<v} |R_u ∩ R_v| / (N T (T - 1))` over `T` lists.
pub fn diversification(lists: &[Vec<VideoId>], n: usize) -> Result<f64> {
    let mut counts: Vec<(VideoId, u64)> = Vec::new();
    for l in lists {
        counts.extend(l.iter().map(|&m| (m, 1)));
    }
    counts.sort_unstable();
    let mut shared: Vec<u64> = Vec::new();
    for run in counts.chunk_by(|a, b| a.0 == b.0) {
        shared.push(run.len() as u64);
    }
    diversification_from_counts(&shared, lists.len(), n)
}

/// Diversification from how many lists contain each video.
fn diversification_from_counts(counts: &[u64], n_targets: usize, n: usize) -> Result<f64> {
    if n_targets < 2 {
        return Err(Error::InsufficientData(format!("diversification needs at least 2 lists, got {n_targets}")));
    }
    if n == 0 {
        return Err(Error::InvalidParams(String::from("N must be positive")));
    }
    let pairs: u64 = counts.iter().map(|&c| c * c.saturating_sub(1) / 2).sum();
    let t = n_targets as f64;
    Ok(1.0 - 2.0 * pairs as f64 / (n as f64 * t * (t - 1.0)))
}

/// Result of one target in one `(K, N)` cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellOutcome {
    pub hits: usize,
    /// Recommended videos as dense indexes.
    pub videos: Vec<u32>,
}

/// One target's outcomes, cells ordered `ks`-major then `ns`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetOutcome {
    pub target: usize,
    pub relevant: usize,
    pub cells: Vec<CellOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub strategy: String,
    pub k: usize,
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub diversification: f64,
    pub n_targets: usize,
}

/// Prepared experiment: sampled targets and a strategy scorer. Targets can be
/// evaluated in any order or in parallel; `aggregate` restores target order.
pub struct Experiment<'a> {
    corpus: &'a Corpus,
    cfg: ExperimentConfig,
    name: String,
    scorer: Scorer<'a>,
    active: Vec<usize>,
    targets: Vec<usize>,
}

impl<'a> Experiment<'a> {
    pub fn new(c: &'a Corpus, strategy: &Strategy<'a>, cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let active = c.active_indices(&DayWindow::TODAY);
        if active.len() < 2 {
            return Err(Error::InsufficientData(format!("{} day-0 active users; at least 2 are needed", active.len())));
        }
        let mut targets = active.clone();
        targets.shuffle(&mut stream(cfg.seed, "rec-targets"));
        targets.truncate(cfg.n_targets);
        targets.sort_unstable();
        Ok(Experiment { corpus: c, cfg: cfg.clone(), name: strategy.name(), scorer: Scorer::new(c, strategy, cfg.seed), active, targets })
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    /// Random day-0-active users other than `t`, plus all of `t`'s friends,
    /// ascending.
    pub fn candidates(&self, t: usize) -> Vec<usize> {
        let pool: Vec<usize> = self.active.iter().copied().filter(|&u| u != t).collect();
        let m = self.cfg.n_candidates.min(pool.len());
        let mut out: Vec<usize> = if m == pool.len() {
            pool
        } else {
            let mut rng = indexed_stream(self.cfg.seed, "rec-candidates", t as u64);
            index::sample(&mut rng, pool.len(), m).into_iter().map(|i| pool[i]).collect()
        };
        out.extend(self.corpus.friends_of(t).iter().map(|&f| f as usize));
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn evaluate_target(&self, t: usize) -> TargetOutcome {
        let c = self.corpus;
        let truth = c.day_views(t, 0);
        let candidates = self.candidates(t);
        let k_max = self.cfg.ks.iter().copied().max().unwrap_or(0);
        let n_max = self.cfg.ns.iter().copied().max().unwrap_or(0);
        let ranked = self.scorer.rank(c, t, &candidates, k_max);
        let mut counts = Vec::new();
        let mut cells = Vec::with_capacity(self.cfg.ks.len() * self.cfg.ns.len());
        for &k in &self.cfg.ks {
            let neighbors = match self.scorer {
                Scorer::Popular => &ranked[..],
                _ => &ranked[..k.min(ranked.len())],
            };
            let full = top_videos(c, neighbors, n_max, &mut counts);
            for &n in &self.cfg.ns {
                let videos = full[..n.min(full.len())].to_vec();
                let hits = videos.iter().filter(|m| truth.binary_search(m).is_ok()).count();
                cells.push(CellOutcome { hits, videos });
            }
        }
        TargetOutcome { target: t, relevant: truth.len(), cells }
    }

    /// One report row per `(K, N)` cell, `ks`-major.
    pub fn aggregate(&self, outcomes: &[TargetOutcome]) -> Result<Vec<ReportRow>> {
        let mut rows = Vec::new();
        let relevant: usize = outcomes.iter().map(|o| o.relevant).sum();
        let mut counts: Vec<u64> = vec![0; self.corpus.n_videos()];
        for (ki, &k) in self.cfg.ks.iter().enumerate() {
            for (ni, &n) in self.cfg.ns.iter().enumerate() {
                let cell = ki * self.cfg.ns.len() + ni;
                counts.iter_mut().for_each(|x| *x = 0);
                let (mut hits, mut recommended) = (0, 0);
                for o in outcomes {
                    let co = &o.cells[cell];
                    hits += co.hits;
                    recommended += co.videos.len();
                    for &m in &co.videos {
                        counts[m as usize] += 1;
                    }
                }
                let acc = Accuracy::from_counts(hits, recommended, relevant);
                rows.push(ReportRow {
                    strategy: self.name.clone(),
                    k,
                    n,
                    precision: acc.precision,
                    recall: acc.recall,
                    f_measure: acc.f_measure,
                    diversification: diversification_from_counts(&counts, outcomes.len(), n)?,
                    n_targets: outcomes.len(),
                });
            }
        }
        Ok(rows)
    }

    /// Recommendation lists of one cell, in target order.
    pub fn lists(&self, outcomes: &[TargetOutcome], k_index: usize, n_index: usize) -> Vec<RecommendationList> {
        let cell = k_index * self.cfg.ns.len() + n_index;
        outcomes
            .iter()
            .map(|o| RecommendationList {
                target: self.corpus.user_at(o.target).id,
                videos: o.cells[cell].videos.iter().map(|&m| self.corpus.video_at(m as usize).id).collect(),
            })
            .collect()
    }
}

/// Sequential run over every target.
pub fn run_experiment(c: &Corpus, strategy: &Strategy<'_>, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let exp = Experiment::new(c, strategy, cfg)?;
    let outcomes: Vec<TargetOutcome> = exp.targets().iter().map(|&t| exp.evaluate_target(t)).collect();
    exp.aggregate(&outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<VideoId> {
        v.iter().map(|&m| VideoId(m)).collect()
    }

    #[test]
    fn f_measure_examples() {
        let l = vec![ids(&[1, 2]), ids(&[3])];
        assert_eq!(f_measure(&l, &l), 1.0);
        assert_eq!(f_measure(&[ids(&[1, 2])], &[ids(&[2, 3])]), 0.5);
        assert_eq!(f_measure(&[ids(&[1])], &[ids(&[2])]), 0.0);
        let a = accuracy(&[ids(&[1, 2, 3])], &[ids(&[1])]);
        assert!((a.f_measure - 2.0 * a.precision * a.recall / (a.precision + a.recall)).abs() < 1e-15);
    }

    #[test]
    fn diversification_examples() {
        let same = vec![ids(&[1, 2, 3]); 4];
        assert_eq!(diversification(&same, 3).unwrap(), 0.0);
        let disjoint = vec![ids(&[1, 2]), ids(&[3, 4]), ids(&[5, 6])];
        assert_eq!(diversification(&disjoint, 2).unwrap(), 1.0);
        assert_eq!(diversification(&[ids(&[1, 2]), ids(&[2, 3])], 2).unwrap(), 0.5);
        assert!(diversification(&[ids(&[1])], 1).is_err());
    }

    #[test]
    fn accuracy_handles_empty_inputs() {
        assert_eq!(Accuracy::from_counts(0, 0, 0).f_measure, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        assert!(ExperimentConfig { ks: vec![0], ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { ns: vec![], ..Default::default() }.validate().is_err());
    }
}
