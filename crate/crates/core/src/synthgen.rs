//! Seeded synthetic corpora with planted homophily.
//!
//! Every user carries a latent topic-affinity vector on the simplex. The
//! knobs control how strongly demographics, friendships, messaging and group
//! membership follow that vector; with every knob at zero the social graph
//! and the demographics are independent of interests.
//!
//! Draw order is fixed and each step pulls from its own named stream, so a
//! change in one step never reshuffles another.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    AgeFilter, CityId, Corpus, CorpusParts, FriendEdge, Gender, GroupId, GroupMembership, MessageRecord, TagId, UserId,
    UserRecord, VideoId, VideoRecord, ViewEvent, FIRST_DAY,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n_users: usize,
    pub n_videos: usize,
    pub n_tags: usize,
    pub n_topics: usize,
    pub n_cities: usize,
    pub n_groups: usize,
    /// Zipf exponent of tag popularity.
    pub zipf_exponent: f64,
    /// Zipf exponent of video popularity inside a topic.
    pub video_zipf: f64,
    /// Friendship acceptance follows affinity cosine with this weight.
    pub friend_interest: f64,
    /// Messaging rate between friends follows affinity cosine with this weight.
    pub message_interest: f64,
    /// Fraction of group joins that follow the user's topics.
    pub group_topic: f64,
    /// Pull of user affinities towards a gender-specific topic centre.
    pub gender_topic_skew: f64,
    /// Pull of user affinities towards topics peaking at the user's age.
    pub age_topic: f64,
    /// Per-day replacement rate of affinity when walking back from day 0.
    pub drift: f64,
    /// Mean videos viewed per user per day.
    pub view_rate: f64,
    /// Fraction of users whose day-0 views are suppressed.
    pub inactivity_fraction: f64,
    pub mean_degree: f64,
    pub groups_per_user: f64,
    /// Relative odds that two friends share a city, versus two random users.
    pub same_city_odds: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            n_users: 5000,
            n_videos: 2000,
            n_tags: 300,
            n_topics: 20,
            n_cities: 60,
            n_groups: 200,
            zipf_exponent: 1.1,
            video_zipf: 0.9,
            friend_interest: 0.8,
            message_interest: 0.8,
            group_topic: 0.6,
            gender_topic_skew: 0.6,
            age_topic: 0.5,
            drift: 0.03,
            view_rate: 2.5,
            inactivity_fraction: 0.2,
            mean_degree: 16.0,
            groups_per_user: 3.0,
            same_city_odds: 18.0,
        }
    }
}

impl GenConfig {
    /// Same shape with every homophily knob and the drift at zero.
    pub fn null(self) -> Self {
        GenConfig {
            friend_interest: 0.0,
            message_interest: 0.0,
            group_topic: 0.0,
            gender_topic_skew: 0.0,
            age_topic: 0.0,
            drift: 0.0,
            ..self
        }
    }

    /// Sets a knob by name; names match the field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: core::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad value `{v}` for `{key}`")))
        }
        match key.trim().replace('-', "_").as_str() {
            "seed" => self.seed = num(key, value)?,
            "n_users" | "users" => self.n_users = num(key, value)?,
            "n_videos" | "videos" => self.n_videos = num(key, value)?,
            "n_tags" | "tags" => self.n_tags = num(key, value)?,
            "n_topics" | "topics" => self.n_topics = num(key, value)?,
            "n_cities" | "cities" => self.n_cities = num(key, value)?,
            "n_groups" | "groups" => self.n_groups = num(key, value)?,
            "zipf_exponent" => self.zipf_exponent = num(key, value)?,
            "video_zipf" => self.video_zipf = num(key, value)?,
            "friend_interest" => self.friend_interest = num(key, value)?,
            "message_interest" => self.message_interest = num(key, value)?,
            "group_topic" => self.group_topic = num(key, value)?,
            "gender_topic_skew" => self.gender_topic_skew = num(key, value)?,
            "age_topic" => self.age_topic = num(key, value)?,
            "drift" => self.drift = num(key, value)?,
            "view_rate" => self.view_rate = num(key, value)?,
            "inactivity_fraction" => self.inactivity_fraction = num(key, value)?,
            "mean_degree" => self.mean_degree = num(key, value)?,
            "groups_per_user" => self.groups_per_user = num(key, value)?,
            "same_city_odds" => self.same_city_odds = num(key, value)?,
            _ => return Err(Error::UnknownKey(String::from(key))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, v) in [
            ("n_users", self.n_users),
            ("n_videos", self.n_videos),
            ("n_tags", self.n_tags),
            ("n_topics", self.n_topics),
            ("n_cities", self.n_cities),
            ("n_groups", self.n_groups),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.n_topics > self.n_tags {
            return bad(format!("n_topics ({}) exceeds n_tags ({})", self.n_topics, self.n_tags));
        }
        for (name, v) in [
            ("friend_interest", self.friend_interest),
            ("message_interest", self.message_interest),
            ("group_topic", self.group_topic),
            ("gender_topic_skew", self.gender_topic_skew),
            ("age_topic", self.age_topic),
            ("drift", self.drift),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.inactivity_fraction) {
            return bad(format!("inactivity_fraction must lie in [0, 1), got {}", self.inactivity_fraction));
        }
        for (name, v) in [("zipf_exponent", self.zipf_exponent), ("video_zipf", self.video_zipf), ("view_rate", self.view_rate)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("mean_degree", self.mean_degree), ("groups_per_user", self.groups_per_user)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.same_city_odds >= 1.0 && self.same_city_odds.is_finite()) {
            return bad(format!("same_city_odds must be at least 1, got {}", self.same_city_odds));
        }
        Ok(())
    }
}

/// Hidden ground truth of a generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentAssignment {
    /// Day-0 topic affinity per user (by user id), summing to 1.
    pub user_affinity: Vec<Vec<f64>>,
    pub video_topic: Vec<u32>,
    pub tag_topic: Vec<u32>,
}

// Dirichlet concentration per unit of topic popularity for user base affinities.
const AFFINITY_CONCENTRATION: f64 = 0.25;
// Share of views that ignore topics and follow global popularity.
const POPULAR_VIEW_SHARE: f64 = 0.1;
// Share of video tags drawn from the video's own topic.
const ON_TOPIC_TAG_SHARE: f64 = 0.85;
const MAX_VIDEO_TAGS: usize = 5;
const FEMALE_CENTRE_TOPICS: usize = 3;
const BASE_MESSAGE_RATE: f64 = 0.12;

fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    (0..n).map(|k| libm::pow((k + 1) as f64, -exponent)).collect()
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / libm::sqrt(na * nb)
    }
}

fn dirichlet(rng: &mut Rng, alphas: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = alphas.iter().map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng)).collect();
    if v.iter().sum::<f64>() <= 0.0 {
        // Every gamma draw underflowed; fall back to the largest prior mass.
        let best = alphas.iter().enumerate().fold(0, |b, (i, &a)| if a > alphas[b] { i } else { b });
        v.iter_mut().for_each(|x| *x = 0.0);
        v[best] = 1.0;
    }
    normalize(&mut v);
    v
}

fn poisson(rng: &mut Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

fn shuffled_ranks(rng: &mut Rng, n: usize) -> Vec<usize> {
    // ranks[item] = popularity rank of item
    let order = index::sample(rng, n, n).into_vec();
    let mut ranks = vec![0; n];
    for (rank, item) in order.into_iter().enumerate() {
        ranks[item] = rank;
    }
    ranks
}

struct Demographics {
    gender: Vec<Gender>,
    age: Vec<u32>,
    city: Vec<u32>,
    sociability: Vec<f64>,
    activity: Vec<f64>,
}

fn draw_demographics(cfg: &GenConfig) -> Demographics {
    let mut rng = stream(cfg.seed, "demographics");
    let city_pick = WeightedIndex::new(zipf_weights(cfg.n_cities, 0.5)).expect("non-empty weights");
    let age_dist = Normal::new(24.0, 7.0).expect("valid normal");
    let soc = Gamma::new(1.5, 1.0 / 1.5).expect("valid gamma");
    let act = Gamma::new(0.8, 1.0 / 0.8).expect("valid gamma");
    let mut d = Demographics { gender: vec![], age: vec![], city: vec![], sociability: vec![], activity: vec![] };
    for _ in 0..cfg.n_users {
        d.gender.push(if rng.random_bool(0.5) { Gender::Female } else { Gender::Male });
        let a: f64 = age_dist.sample(&mut rng);
        d.age.push(libm::round(a).clamp(10.0, 40.0) as u32);
        d.city.push(city_pick.sample(&mut rng) as u32);
        d.sociability.push(soc.sample(&mut rng));
        d.activity.push(act.sample(&mut rng));
    }
    d
}

struct Topics {
    popularity: Vec<f64>,
    prior: Vec<f64>,
    affinity: Vec<Vec<f64>>,
}

fn draw_affinities(cfg: &GenConfig, demo: &Demographics) -> Topics {
    let mut rng = stream(cfg.seed, "affinity");
    let t = cfg.n_topics;
    let mut popularity = zipf_weights(t, 0.6);
    normalize(&mut popularity);
    let prior: Vec<f64> = popularity.iter().map(|p| (AFFINITY_CONCENTRATION * t as f64 * p).max(1e-3)).collect();

    let mut female_centre = vec![0.0; t];
    // the centre is a few topics drawn by popularity
    let mut remaining = popularity.clone();
    for _ in 0..FEMALE_CENTRE_TOPICS.min(t) {
        let k = WeightedIndex::new(&remaining).expect("positive weights").sample(&mut rng);
        female_centre[k] = 1.0;
        remaining[k] = 0.0;
    }
    normalize(&mut female_centre);
    let age_peaks: Vec<f64> = (0..t).map(|_| rng.random_range(12.0..38.0)).collect();

    let w_gender = 0.5 * cfg.gender_topic_skew;
    let w_age = 0.35 * cfg.age_topic;
    let affinity = (0..cfg.n_users)
        .map(|u| {
            let base = dirichlet(&mut rng, &prior);
            // only female affinities lean towards a shared centre
            let w_g = if demo.gender[u] == Gender::Female { w_gender } else { 0.0 };
            let age = f64::from(demo.age[u]);
            let mut by_age: Vec<f64> =
                age_peaks.iter().map(|p| libm::exp(-(age - p) * (age - p) / (2.0 * 25.0))).collect();
            normalize(&mut by_age);
            let mut a: Vec<f64> = (0..t)
                .map(|k| (1.0 - w_g - w_age) * base[k] + w_g * female_centre[k] + w_age * by_age[k])
                .collect();
            normalize(&mut a);
            a
        })
        .collect();
    Topics { popularity, prior, affinity }
}

struct Catalog {
    tag_topic: Vec<u32>,
    video_topic: Vec<u32>,
    video_tags: Vec<Vec<u32>>,
    video_weight: Vec<f64>,
}

fn draw_catalog(cfg: &GenConfig, topics: &Topics) -> Catalog {
    let mut rng = stream(cfg.seed, "tags");
    let mut tag_topic: Vec<u32> = (0..cfg.n_tags).map(|i| if i < cfg.n_topics { i as u32 } else { 0 }).collect();
    for slot in tag_topic.iter_mut().skip(cfg.n_topics) {
        *slot = rng.random_range(0..cfg.n_topics) as u32;
    }
    let zipf = zipf_weights(cfg.n_tags, cfg.zipf_exponent);
    let tag_weight: Vec<f64> = shuffled_ranks(&mut rng, cfg.n_tags).into_iter().map(|r| zipf[r]).collect();
    let global_tags = WeightedIndex::new(&tag_weight).expect("positive weights");
    let topic_tags: Vec<(Vec<u32>, WeightedIndex<f64>)> = (0..cfg.n_topics)
        .map(|k| {
            let ids: Vec<u32> = (0..cfg.n_tags as u32).filter(|&i| tag_topic[i as usize] == k as u32).collect();
            let w = WeightedIndex::new(ids.iter().map(|&i| tag_weight[i as usize])).expect("every topic owns a tag");
            (ids, w)
        })
        .collect();

    let mut rng = stream(cfg.seed, "videos");
    let topic_pick = WeightedIndex::new(&topics.popularity).expect("positive weights");
    let mut video_topic = Vec::with_capacity(cfg.n_videos);
    let mut video_tags = Vec::with_capacity(cfg.n_videos);
    for _ in 0..cfg.n_videos {
        let k = topic_pick.sample(&mut rng);
        video_topic.push(k as u32);
        let n = rng.random_range(1..=MAX_VIDEO_TAGS);
        let mut tags: Vec<u32> = (0..n)
            .map(|_| {
                if rng.random_bool(ON_TOPIC_TAG_SHARE) {
                    let (ids, w) = &topic_tags[k];
                    ids[w.sample(&mut rng)]
                } else {
                    global_tags.sample(&mut rng) as u32
                }
            })
            .collect();
        tags.sort_unstable();
        tags.dedup();
        video_tags.push(tags);
    }
    // popularity rank inside each topic
    let vz = zipf_weights(cfg.n_videos, cfg.video_zipf);
    let mut video_weight = vec![0.0; cfg.n_videos];
    for k in 0..cfg.n_topics as u32 {
        let members: Vec<usize> = (0..cfg.n_videos).filter(|&m| video_topic[m] == k).collect();
        let ranks = shuffled_ranks(&mut rng, members.len());
        for (j, &m) in members.iter().enumerate() {
            video_weight[m] = vz[ranks[j]];
        }
    }
    Catalog { tag_topic, video_topic, video_tags, video_weight }
}

fn draw_friends(cfg: &GenConfig, demo: &Demographics, topics: &Topics) -> BTreeSet<(u32, u32)> {
    let mut rng = stream(cfg.seed, "friends");
    let n = cfg.n_users;
    let mut edges = BTreeSet::new();
    if n < 2 {
        return edges;
    }
    let max_edges = n * (n - 1) / 2;
    let target = (libm::round(n as f64 * cfg.mean_degree / 2.0) as usize).min(max_edges);
    if target == 0 {
        return edges;
    }
    let mut by_city: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_cities];
    for u in 0..n {
        by_city[demo.city[u] as usize].push(u);
    }
    let p_random: f64 = by_city.iter().map(|c| (c.len() as f64 / n as f64) * (c.len() as f64 / n as f64)).sum();
    let p_city = if p_random < 1.0 {
        ((cfg.same_city_odds - 1.0) * p_random / (1.0 - p_random)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let global = WeightedIndex::new(&demo.sociability).expect("positive weights");
    let city_pickers: Vec<Option<WeightedIndex<f64>>> = by_city
        .iter()
        .map(|members| WeightedIndex::new(members.iter().map(|&u| demo.sociability[u])).ok())
        .collect();
    let h = cfg.friend_interest;
    let mut attempts = 0usize;
    while edges.len() < target && attempts < 200 * target {
        attempts += 1;
        let u = global.sample(&mut rng);
        let v = if rng.random_bool(p_city) {
            match &city_pickers[demo.city[u] as usize] {
                Some(pick) => by_city[demo.city[u] as usize][pick.sample(&mut rng)],
                None => continue,
            }
        } else {
            global.sample(&mut rng)
        };
        if u == v {
            continue;
        }
        let accept = (1.0 - h) + h * cosine(&topics.affinity[u], &topics.affinity[v]);
        if rng.random::<f64>() < accept {
            edges.insert((u.min(v) as u32, u.max(v) as u32));
        }
    }
    edges
}

fn draw_groups(cfg: &GenConfig, topics: &Topics) -> Vec<GroupMembership> {
    let mut rng = stream(cfg.seed, "groups");
    let by_topic: Vec<Vec<u32>> =
        (0..cfg.n_topics).map(|k| (0..cfg.n_groups as u32).filter(|g| *g as usize % cfg.n_topics == k).collect()).collect();
    let mut out = Vec::new();
    for u in 0..cfg.n_users {
        let joins = (poisson(&mut rng, cfg.groups_per_user) as usize).min(cfg.n_groups);
        let topic_pick = WeightedIndex::new(&topics.affinity[u]).expect("simplex weights");
        let mut mine = BTreeSet::new();
        for _ in 0..joins {
            let g = if rng.random_bool(cfg.group_topic) {
                let k = topic_pick.sample(&mut rng);
                let pool = &by_topic[k];
                if pool.is_empty() {
                    rng.random_range(0..cfg.n_groups as u32)
                } else {
                    pool[rng.random_range(0..pool.len())]
                }
            } else {
                rng.random_range(0..cfg.n_groups as u32)
            };
            mine.insert(g);
        }
        out.extend(mine.into_iter().map(|g| GroupMembership { user: UserId(u as u32), group: GroupId(g) }));
    }
    out
}

fn draw_messages(cfg: &GenConfig, edges: &BTreeSet<(u32, u32)>, topics: &Topics) -> Vec<MessageRecord> {
    let mut rng = stream(cfg.seed, "messages");
    let tie_dist = Gamma::new(0.7, 1.0 / 0.7).expect("valid gamma");
    let h = cfg.message_interest;
    let mut out = Vec::new();
    for &(a, b) in edges {
        let tie: f64 = tie_dist.sample(&mut rng);
        let cos = cosine(&topics.affinity[a as usize], &topics.affinity[b as usize]);
        let rate = BASE_MESSAGE_RATE * tie * ((1.0 - h) + h * 3.0 * cos);
        let p_day = 1.0 - libm::exp(-rate);
        for day in FIRST_DAY..=-1 {
            if rng.random_bool(p_day.clamp(0.0, 1.0)) {
                let count = 1 + poisson(&mut rng, 1.5 * tie) as u32;
                out.push(MessageRecord { a: UserId(a), b: UserId(b), day, count });
            }
        }
    }
    out
}

fn draw_views(cfg: &GenConfig, demo: &Demographics, topics: &Topics, catalog: &Catalog) -> Vec<ViewEvent> {
    let mut rng = stream(cfg.seed, "views");
    let mut drift_rng = stream(cfg.seed, "drift");
    let mut topic_videos: Vec<(Vec<u32>, Option<WeightedIndex<f64>>)> = Vec::with_capacity(cfg.n_topics);
    for k in 0..cfg.n_topics as u32 {
        let ids: Vec<u32> = (0..cfg.n_videos as u32).filter(|&m| catalog.video_topic[m as usize] == k).collect();
        let w = WeightedIndex::new(ids.iter().map(|&m| catalog.video_weight[m as usize])).ok();
        topic_videos.push((ids, w));
    }
    let global_weights: Vec<f64> = (0..cfg.n_videos)
        .map(|m| catalog.video_weight[m] * topics.popularity[catalog.video_topic[m] as usize])
        .collect();
    let global = WeightedIndex::new(&global_weights).expect("positive weights");

    let mut out = Vec::new();
    let mut day_set: Vec<u32> = Vec::new();
    for u in 0..cfg.n_users {
        let suppress_today = rng.random_bool(cfg.inactivity_fraction);
        let rate = cfg.view_rate * demo.activity[u];
        let mut affinity = topics.affinity[u].clone();
        for day in (FIRST_DAY..=0).rev() {
            let n = poisson(&mut rng, rate);
            day_set.clear();
            if n > 0 {
                let topic_pick = WeightedIndex::new(&affinity).expect("simplex weights");
                for _ in 0..n {
                    let m = if rng.random_bool(POPULAR_VIEW_SHARE) {
                        global.sample(&mut rng) as u32
                    } else {
                        match &topic_videos[topic_pick.sample(&mut rng)] {
                            (ids, Some(w)) => ids[w.sample(&mut rng)],
                            _ => global.sample(&mut rng) as u32,
                        }
                    };
                    day_set.push(m);
                }
            }
            if !(day == 0 && suppress_today) {
                day_set.sort_unstable();
                day_set.dedup();
                out.extend(day_set.iter().map(|&m| ViewEvent { user: UserId(u as u32), video: VideoId(m), day }));
            }
            if cfg.drift > 0.0 {
                let fresh = dirichlet(&mut drift_rng, &topics.prior);
                for (a, f) in affinity.iter_mut().zip(fresh) {
                    *a = (1.0 - cfg.drift) * *a + cfg.drift * f;
                }
                normalize(&mut affinity);
            }
        }
    }
    out
}

/// Generates a corpus and its latent ground truth; deterministic in `cfg`.
pub fn generate(cfg: &GenConfig) -> Result<(Corpus, LatentAssignment)> {
    cfg.validate()?;
    let demo = draw_demographics(cfg);
    let topics = draw_affinities(cfg, &demo);
    let catalog = draw_catalog(cfg, &topics);
    let edges = draw_friends(cfg, &demo, &topics);
    let memberships = draw_groups(cfg, &topics);
    let messages = draw_messages(cfg, &edges, &topics);
    let views = draw_views(cfg, &demo, &topics, &catalog);

    let parts = CorpusParts {
        users: (0..cfg.n_users)
            .map(|u| UserRecord {
                id: UserId(u as u32),
                gender: demo.gender[u],
                age: demo.age[u],
                city: CityId(demo.city[u]),
            })
            .collect(),
        videos: catalog
            .video_tags
            .iter()
            .enumerate()
            .map(|(m, tags)| VideoRecord { id: VideoId(m as u32), tags: tags.iter().map(|&t| TagId(t)).collect() })
            .collect(),
        views,
        friends: edges.iter().map(|&(a, b)| FriendEdge { a: UserId(a), b: UserId(b) }).collect(),
        memberships,
        messages,
    };
    let (corpus, _) = Corpus::build(parts, AgeFilter::default())?;
    let latent =
        LatentAssignment { user_affinity: topics.affinity, video_topic: catalog.video_topic, tag_topic: catalog.tag_topic };
    Ok((corpus, latent))
}
