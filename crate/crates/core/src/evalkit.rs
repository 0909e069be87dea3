//! Metrics, the train/test protocol and bucketed similarity studies.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DayWindow, UserId};
use crate::error::{Error, Result};
use crate::mlcore::Task;
use crate::model::{ModelKind, Predictor, TrainParams};
use crate::pairfeat::{label_pairs, CategorySet, FeatureRecord, PairSample};
use crate::profiling::{individuality_value, ptp_counts, ProfileKind, ProfileSet, SimKind, WindowStats};
use crate::rng::stream;

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Mann–Whitney AUC; a tied positive-negative pair counts one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParams(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn mae(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| libm::fabs(p - t)).sum::<f64>() / target.len() as f64
}

/// `100 · (1 - MAE(pred) / MAE(train_mean))`.
pub fn reduced_mae_ratio(pred: &[f64], target: &[f64], train_mean: f64) -> Result<f64> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(Error::InvalidParams(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    let base = target.iter().map(|t| libm::fabs(t - train_mean)).sum::<f64>() / target.len() as f64;
    if base == 0.0 {
        return Err(Error::DegenerateBaseline);
    }
    Ok(100.0 * (1.0 - mae(pred, target) / base))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParams(format!("pearson needs two equal series of length ≥ 2, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
}

impl Split {
    /// Seeded shuffle; the first `round(fraction · n)` rows train. Both index
    /// lists are ascending.
    pub fn new(n: usize, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidParams(format!("train fraction must lie in (0, 1), got {fraction}")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(seed, "split"));
        let cut = libm::round(fraction * n as f64) as usize;
        let mut train = order[..cut].to_vec();
        let mut test = order[cut..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok(Split { train, test, fraction, seed })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryLabeling {
    pub threshold: f64,
    pub labels: Vec<bool>,
}

impl BinaryLabeling {
    /// Threshold = mean of `train`; a value is positive iff strictly above it.
    pub fn fit(train: &[f64]) -> Result<f64> {
        if train.is_empty() {
            return Err(Error::InsufficientData(String::from("no training similarities to threshold")));
        }
        Ok(train.iter().sum::<f64>() / train.len() as f64)
    }

    pub fn apply(threshold: f64, values: &[f64]) -> Self {
        BinaryLabeling { threshold, labels: values.iter().map(|&v| v > threshold).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: ModelKind,
    pub task: Task,
    pub kind: SimKind,
    pub categories: CategorySet,
    pub n_train: usize,
    pub n_test: usize,
    pub train_mean: f64,
    /// Classification only.
    pub auc: Option<f64>,
    /// Regression only, in percent.
    pub reduced_mae_pct: Option<f64>,
    pub mae: Option<f64>,
    pub seed: u64,
}

impl MetricsReport {
    /// AUC for classification, reduced-MAE percentage for regression.
    pub fn headline(&self) -> f64 {
        self.auc.or(self.reduced_mae_pct).unwrap_or(f64::NAN)
    }
}

fn labelled(samples: &[PairSample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| s.label_sim.ok_or_else(|| Error::InsufficientData(String::from("sample without a similarity label"))))
        .collect()
}

/// 70/30 split, mean-threshold binarization for classification (training rows
/// only), model selection by CV inside training, metrics on the held-out 30%.
pub fn run_protocol(
    samples: &[PairSample],
    model: ModelKind,
    task: Task,
    categories: CategorySet,
    params: &TrainParams,
    seed: u64,
) -> Result<MetricsReport> {
    run_protocol_with_model(samples, model, task, categories, params, seed).map(|(r, _)| r)
}

/// [`run_protocol`], also returning the model fitted on the training part.
pub fn run_protocol_with_model(
    samples: &[PairSample],
    model: ModelKind,
    task: Task,
    categories: CategorySet,
    params: &TrainParams,
    seed: u64,
) -> Result<(MetricsReport, Predictor)> {
    let kind = samples.first().map(|s| s.kind).ok_or_else(|| Error::InsufficientData(String::from("no samples")))?;
    let sims = labelled(samples)?;
    let split = Split::new(samples.len(), 0.7, seed)?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::InsufficientData(format!("{} samples cannot be split", samples.len())));
    }
    let pick = |idx: &[usize]| -> (Vec<FeatureRecord>, Vec<f64>) {
        (idx.iter().map(|&i| samples[i].features.clone()).collect(), idx.iter().map(|&i| sims[i]).collect())
    };
    let (train_x, train_y) = pick(&split.train);
    let (test_x, test_y) = pick(&split.test);
    let train_mean = BinaryLabeling::fit(&train_y)?;
    let params = TrainParams { seed, ..params.clone() };
    let mut report = MetricsReport {
        model,
        task,
        kind,
        categories,
        n_train: train_y.len(),
        n_test: test_y.len(),
        train_mean,
        auc: None,
        reduced_mae_pct: None,
        mae: None,
        seed,
    };
    match task {
        Task::Classification => {
            let train_labels = BinaryLabeling::apply(train_mean, &train_y);
            let test_labels = BinaryLabeling::apply(train_mean, &test_y);
            if test_labels.labels.iter().all(|&l| l) || test_labels.labels.iter().all(|&l| !l) {
                return Err(Error::SingleClass);
            }
            let targets: Vec<f64> = train_labels.labels.iter().map(|&l| f64::from(u8::from(l))).collect();
            let p = Predictor::train(model, task, &train_x, &targets, categories, &params)?;
            report.auc = Some(auc(&p.predict(&test_x), &test_labels.labels)?);
            Ok((report, p))
        }
        Task::Regression => {
            let p = Predictor::train(model, task, &train_x, &train_y, categories, &params)?;
            let pred = p.predict(&test_x);
            report.reduced_mae_pct = Some(reduced_mae_ratio(&pred, &test_y, train_mean)?);
            report.mae = Some(mae(&pred, &test_y));
            Ok((report, p))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub categories: CategorySet,
    pub report: MetricsReport,
}

/// The protocol over all seven category combinations with one model kind.
pub fn ablation_sweep(
    samples: &[PairSample],
    model: ModelKind,
    task: Task,
    params: &TrainParams,
    seed: u64,
) -> Result<Vec<AblationRow>> {
    CategorySet::combinations()
        .into_iter()
        .map(|categories| {
            run_protocol(samples, model, task, categories, params, seed).map(|report| AblationRow { categories, report })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BucketKey {
    Gender,
    AgePair,
    SameCity,
    Friendship,
    MsgCount,
    MsgDays,
    CommonFriendRatio,
    CommonGroups,
    GroupsFriendship,
    IndividualityProduct,
    SelfSimilarity,
}

impl BucketKey {
    pub const ALL: [BucketKey; 11] = [
        BucketKey::Gender,
        BucketKey::AgePair,
        BucketKey::SameCity,
        BucketKey::Friendship,
        BucketKey::MsgCount,
        BucketKey::MsgDays,
        BucketKey::CommonFriendRatio,
        BucketKey::CommonGroups,
        BucketKey::GroupsFriendship,
        BucketKey::IndividualityProduct,
        BucketKey::SelfSimilarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BucketKey::Gender => "gender",
            BucketKey::AgePair => "agepair",
            BucketKey::SameCity => "samecity",
            BucketKey::Friendship => "friendship",
            BucketKey::MsgCount => "msgcount",
            BucketKey::MsgDays => "msgdays",
            BucketKey::CommonFriendRatio => "cfr",
            BucketKey::CommonGroups => "groups",
            BucketKey::GroupsFriendship => "groupsfriendship",
            BucketKey::IndividualityProduct => "individuality",
            BucketKey::SelfSimilarity => "selfsim",
        }
    }

    /// Continuous keys bucket into equal-count bins.
    pub fn is_continuous(self) -> bool {
        matches!(self, BucketKey::MsgCount | BucketKey::MsgDays | BucketKey::CommonFriendRatio | BucketKey::IndividualityProduct)
    }
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BucketKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BucketKey::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownKey(String::from(s)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub label: String,
    /// Position of the bucket in its natural order.
    pub order: usize,
    pub mean: f64,
    pub count: usize,
    /// Sample standard deviation over `sqrt(count)`; 0 for a single member.
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    pub key: BucketKey,
    pub rows: Vec<BucketRow>,
}

impl BucketTable {
    pub fn row(&self, label: &str) -> Option<&BucketRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn total_count(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }
}

#[derive(Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn row(&self, label: String, order: usize) -> BucketRow {
        let n = self.n as f64;
        let mean = self.sum / n;
        let se = if self.n > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            libm::sqrt(var / n)
        } else {
            0.0
        };
        BucketRow { label, order, mean, count: self.n, se }
    }
}

/// Groups `(order, label, value)` observations into rows sorted by order.
fn tabulate(key: BucketKey, obs: impl IntoIterator<Item = (usize, String, f64)>) -> BucketTable {
    let mut groups: BTreeMap<usize, (String, Moments)> = BTreeMap::new();
    for (order, label, v) in obs {
        groups.entry(order).or_insert_with(|| (label, Moments::default())).1.push(v);
    }
    BucketTable { key, rows: groups.into_iter().map(|(order, (label, m))| m.row(label, order)).collect() }
}

/// Deduplicated quantile edges splitting `values` into `bins` equal-count bins.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins).filter_map(|k| sorted.get((k * n / bins).max(1) - 1).copied()).collect();
    edges.dedup();
    if edges.last() == sorted.last() {
        edges.pop();
    }
    edges
}

/// Bin index of `v`: the number of edges strictly below it.
pub fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e < v)
}

fn bin_label(edges: &[f64], b: usize) -> String {
    match (b.checked_sub(1).map(|i| edges[i]), edges.get(b)) {
        (None, Some(hi)) => format!("<={hi}"),
        (Some(lo), Some(hi)) => format!("({lo},{hi}]"),
        (Some(lo), None) => format!(">{lo}"),
        (None, None) => String::from("all"),
    }
}

fn age_band(a: u32) -> (usize, String) {
    let lo = a - a % 5;
    (lo as usize, format!("{lo}-{}", lo + 4))
}

/// Buckets labelled samples by a discrete key computed from their features.
/// Continuous keys use `bins` equal-count bins; `extra` carries per-sample
/// values the features lack (the individuality product).
pub fn bucket_samples(samples: &[PairSample], key: BucketKey, bins: usize, extra: Option<&[f64]>) -> Result<BucketTable> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(String::from("no pairs to bucket")));
    }
    let sims = labelled(samples)?;
    let continuous = |values: Vec<f64>| {
        let edges = quantile_edges(&values, bins.max(1));
        tabulate(
            key,
            values.iter().zip(&sims).map(|(&v, &s)| {
                let b = bin_of(&edges, v);
                (b, bin_label(&edges, b), s)
            }),
        )
    };
    let f = |s: &PairSample| s.features.clone();
    Ok(match key {
        BucketKey::Gender => tabulate(
            key,
            samples.iter().zip(&sims).map(|(s, &v)| (s.features.gender_pair.code() as usize, s.features.gender_pair.name().to_string(), v)),
        ),
        BucketKey::AgePair => tabulate(
            key,
            samples.iter().zip(&sims).map(|(s, &v)| {
                let (ot, lt) = age_band(s.features.age_target);
                let (oh, lh) = age_band(s.features.age_helper);
                (ot * 100 + oh, format!("{lt}|{lh}"), v)
            }),
        ),
        BucketKey::SameCity => {
            tabulate(key, samples.iter().zip(&sims).map(|(s, &v)| (usize::from(s.features.same_city), s.features.same_city.to_string(), v)))
        }
        BucketKey::Friendship => tabulate(
            key,
            samples.iter().zip(&sims).map(|(s, &v)| (usize::from(s.features.friendship), s.features.friendship.to_string(), v)),
        ),
        BucketKey::CommonGroups => tabulate(
            key,
            samples.iter().zip(&sims).map(|(s, &v)| {
                let g = s.features.common_groups.min(5) as usize;
                (g, if g == 5 { String::from("5+") } else { g.to_string() }, v)
            }),
        ),
        BucketKey::GroupsFriendship => tabulate(
            key,
            samples.iter().zip(&sims).map(|(s, &v)| {
                let g = s.features.common_groups.min(5) as usize;
                let fr = usize::from(s.features.friendship);
                (fr * 10 + g, format!("friends={fr},groups={}", if g == 5 { String::from("5+") } else { g.to_string() }), v)
            }),
        ),
        BucketKey::MsgCount => continuous(samples.iter().map(|s| f64::from(f(s).msg_count_month)).collect()),
        BucketKey::MsgDays => continuous(samples.iter().map(|s| f64::from(f(s).msg_days_month)).collect()),
        BucketKey::CommonFriendRatio => continuous(samples.iter().map(|s| s.features.common_friend_ratio).collect()),
        BucketKey::IndividualityProduct => {
            let values = extra.ok_or_else(|| Error::InvalidParams(String::from("individuality buckets need per-pair products")))?;
            if values.len() != samples.len() {
                return Err(Error::InvalidParams(String::from("one individuality product per pair is required")));
            }
            continuous(values.to_vec())
        }
        BucketKey::SelfSimilarity => return Err(Error::InvalidParams(String::from("self-similarity is a per-user study"))),
    })
}

/// Mean day-0 similarity of `pairs` per bucket of `key`, with decile bins for
/// continuous keys. `SelfSimilarity` instead tabulates day-0 versus day `-lag`
/// self-similarity of the distinct users in `pairs`, for lags 1 to 30.
pub fn bucket_similarity(c: &Corpus, pairs: &[(UserId, UserId)], key: BucketKey, kind: SimKind) -> Result<BucketTable> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData(String::from("no pairs to bucket")));
    }
    let idx: Vec<(usize, usize)> =
        pairs.iter().map(|&(a, b)| Ok((c.require_user(a)?, c.require_user(b)?))).collect::<Result<_>>()?;
    if key == BucketKey::SelfSimilarity {
        let mut users: Vec<usize> = idx.iter().flat_map(|&(a, b)| [a, b]).collect();
        users.sort_unstable();
        users.dedup();
        return self_similarity_table(c, &users, kind, &(1..=30).collect::<Vec<_>>());
    }
    let samples = label_pairs(c, &idx, kind);
    let extra = (key == BucketKey::IndividualityProduct).then(|| individuality_products(c, &idx, kind));
    bucket_samples(&samples, key, 10, extra.as_deref())
}

/// Day-0 individuality of both users, multiplied, for each pair.
pub fn individuality_products(c: &Corpus, pairs: &[(usize, usize)], kind: SimKind) -> Vec<f64> {
    let stats = WindowStats::compute(c, &DayWindow::TODAY);
    let h = |u: usize| {
        let videos = c.day_views(u, 0);
        match kind {
            SimKind::Vbp => {
                let base: Vec<(u32, f64)> = videos.iter().map(|&m| (m, 1.0)).collect();
                individuality_value(&base, &stats.video_owners, stats.n_active, false, None)
            }
            _ => individuality_value(&ptp_counts(c, videos), &stats.tag_owners, stats.n_active, kind == SimKind::Rtp, None),
        }
    };
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    pairs
        .iter()
        .map(|&(a, b)| {
            let ha = *cache.entry(a).or_insert_with(|| h(a));
            let hb = *cache.entry(b).or_insert_with(|| h(b));
            ha * hb
        })
        .collect()
}

/// Mean self-similarity between day 0 and day `-lag` over `users` active on
/// both days, one row per lag. VBP uses video-set cosine.
pub fn self_similarity_table(c: &Corpus, users: &[usize], kind: SimKind, lags: &[u32]) -> Result<BucketTable> {
    let today_stats = (kind == SimKind::Rtp).then(|| WindowStats::compute(c, &DayWindow::TODAY));
    let today = ProfileSet::build_with(c, kind, &DayWindow::TODAY, today_stats.as_ref());
    let mut obs = Vec::new();
    for &lag in lags {
        let w = DayWindow::single(-(lag as i32))?;
        let stats = (kind == SimKind::Rtp).then(|| WindowStats::compute(c, &w));
        let past = ProfileSet::build_with(c, kind, &w, stats.as_ref());
        for &u in users {
            if !today.is_empty_profile(u) && c.is_active(u, &w) {
                obs.push((lag as usize, format!("{lag}"), today.similarity_across(u, &past, u)));
            }
        }
    }
    if obs.is_empty() {
        return Err(Error::InsufficientData(String::from("no user is active on day 0 and a lag day")));
    }
    Ok(tabulate(BucketKey::SelfSimilarity, obs))
}

/// Fractions of day-0 actives also active in the past day, week and month,
/// with the Pearson correlation between day-0 similarity and each window's
/// similarity over `pairs` of day-0 actives.
pub fn coverage_and_correlation(c: &Corpus, pairs: &[(usize, usize)], kind: ProfileKind) -> Result<[(f64, f64); 3]> {
    let cov = crate::corpus::coverage_ratios(c)?;
    let today = ProfileSet::build(c, kind.into(), &DayWindow::TODAY);
    let mut out = [(0.0, 0.0); 3];
    for (k, w) in [DayWindow::PAST_DAY, DayWindow::PAST_WEEK, DayWindow::PAST_MONTH].iter().enumerate() {
        let past = ProfileSet::build(c, kind.into(), w);
        let (x, y): (Vec<f64>, Vec<f64>) =
            pairs.iter().map(|&(a, b)| (today.similarity(a, b), past.similarity(a, b))).unzip();
        out[k] = (cov[k], pearson(&x, &y)?);
    }
    Ok(out)
}
