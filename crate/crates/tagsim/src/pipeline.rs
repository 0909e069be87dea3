//! Stage functions shared by the subcommands, and the end-to-end pipeline.
//!
//! Parallel stages map over an indexed list inside a dedicated rayon pool and
//! collect in list order, so outputs never depend on the thread count.

use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tagsim_core::corpus::{Corpus, DayWindow, UserId};
use tagsim_core::evalkit::{
    bucket_samples, coverage_and_correlation, individuality_products, run_protocol, run_protocol_with_model,
    self_similarity_table, AblationRow, BucketKey, BucketTable, MetricsReport,
};
use tagsim_core::mlcore::Task;
use tagsim_core::model::{ModelKind, Predictor, TrainParams};
use tagsim_core::pairfeat::{build_training_set, label_pairs, CategorySet, PairSample};
use tagsim_core::profiling::{ProfileKind, SimKind};
use tagsim_core::recommend::{Experiment, ExperimentConfig, ReportRow, Strategy, TargetOutcome};
use tagsim_core::synthgen::{generate, GenConfig};

use crate::config::{parse_grid, parse_list, Settings};
use crate::formats::{
    ablation_csv, bucket_csv, json_bytes, metrics_csv, profiles_jsonl, recommendation_csv, samples_csv, ModelFile,
};
use crate::io::write_corpus;
use crate::manifest::ManifestBuilder;

/// Every generator knob accepted in settings, by settings key.
pub const GEN_KEYS: [&str; 20] = [
    "seed",
    "users",
    "videos",
    "tags",
    "topics",
    "cities",
    "groups",
    "zipf-exponent",
    "video-zipf",
    "friend-interest",
    "message-interest",
    "group-topic",
    "gender-topic-skew",
    "age-topic",
    "drift",
    "view-rate",
    "inactivity-fraction",
    "mean-degree",
    "groups-per-user",
    "same-city-odds",
];

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().context("building the worker pool")
}

/// Applies generator knobs from `s`; `null=true` then zeroes every homophily knob.
pub fn gen_config(s: &mut Settings) -> Result<GenConfig> {
    let mut cfg = GenConfig::default();
    for key in GEN_KEYS {
        if let Some(v) = s.raw(key) {
            cfg.set(key, v).map_err(|e| anyhow!("{e}"))?;
        }
    }
    if s.flag("null")? {
        cfg = cfg.null();
    }
    cfg.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(cfg)
}

pub fn train_params(s: &mut Settings) -> Result<TrainParams> {
    let mut p = TrainParams::default();
    p.gbdt.n_trees = s.get_or("gbdt-trees", p.gbdt.n_trees)?;
    p.forest.n_trees = s.get_or("forest-trees", p.forest.n_trees)?;
    p.cv_folds = s.get_or("cv-folds", p.cv_folds)?;
    p.prune_folds = s.get_or("prune-folds", p.prune_folds)?;
    p.grid_len = s.get_or("grid-len", p.grid_len)?;
    p.min_ratio = s.get_or("min-ratio", p.min_ratio)?;
    Ok(p)
}

pub fn experiment_config(s: &mut Settings, seed: u64) -> Result<ExperimentConfig> {
    let d = ExperimentConfig::default();
    let ks = parse_grid(&s.get_or("K", String::from("15"))?)?;
    let ns = parse_grid(&s.get_or("N", String::from("10..100"))?)?;
    let cfg = ExperimentConfig {
        n_targets: s.get_or("rec-targets", d.n_targets)?,
        n_candidates: s.get_or("rec-candidates", d.n_candidates)?,
        ks,
        ns,
        seed,
    };
    cfg.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(cfg)
}

fn core<T>(r: tagsim_core::Result<T>) -> Result<T> {
    r.map_err(|e| anyhow!("{e}"))
}

/// Recommendation experiment with targets evaluated in parallel.
pub fn run_recommendation(
    pool: &rayon::ThreadPool,
    c: &Corpus,
    strategy: &Strategy<'_>,
    cfg: &ExperimentConfig,
) -> Result<Vec<ReportRow>> {
    let exp = core(Experiment::new(c, strategy, cfg))?;
    let outcomes: Vec<TargetOutcome> = pool.install(|| exp.targets().par_iter().map(|&t| exp.evaluate_target(t)).collect());
    core(exp.aggregate(&outcomes))
}

/// The study populations: uniformly random day-0-active pairs, and every
/// friendship among day-0 actives (`a < b`).
pub fn friend_pairs(c: &Corpus) -> Vec<(usize, usize)> {
    let mut active = vec![false; c.n_users()];
    for u in c.active_indices(&DayWindow::TODAY) {
        active[u] = true;
    }
    (0..c.n_users())
        .filter(|&a| active[a])
        .flat_map(|a| c.friends_of(a).iter().map(move |&b| (a, b as usize)))
        .filter(|&(a, b)| a < b && active[b])
        .collect()
}

pub const STUDY_KEYS: [BucketKey; 11] = [
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

/// Which pairs a key is studied over. Messaging only happens between
/// friends, so its keys use friend pairs; friendship compares friend pairs
/// against the random population.
pub fn population_of(key: BucketKey) -> &'static str {
    match key {
        BucketKey::MsgCount | BucketKey::MsgDays => "friends",
        BucketKey::Friendship | BucketKey::GroupsFriendship => "mixed",
        BucketKey::SelfSimilarity => "users",
        _ => "random",
    }
}

/// One correlation table of `key` from pre-labelled random pairs `random`
/// (all of one kind) and the friend pairs labelled on demand.
pub fn study_table(c: &Corpus, kind: SimKind, key: BucketKey, random: &[PairSample], friends: &[PairSample]) -> Result<BucketTable> {
    let bins = 10;
    match population_of(key) {
        "users" => {
            let users = c.active_indices(&DayWindow::TODAY);
            core(self_similarity_table(c, &users, kind, &(1..=30).collect::<Vec<_>>()))
        }
        "friends" => core(bucket_samples(friends, key, bins, None)),
        "mixed" => {
            let all: Vec<PairSample> = random.iter().chain(friends).cloned().collect();
            core(bucket_samples(&all, key, bins, None))
        }
        _ => {
            let extra = if key == BucketKey::IndividualityProduct {
                let idx: Vec<(usize, usize)> = random
                    .iter()
                    .map(|s| Ok((core(c.require_user(s.target))?, core(c.require_user(s.helper))?)))
                    .collect::<Result<_>>()?;
                Some(individuality_products(c, &idx, kind))
            } else {
                None
            };
            core(bucket_samples(random, key, bins, extra.as_deref()))
        }
    }
}

/// Studies of every key for one kind, keys evaluated in parallel.
pub fn study_all(pool: &rayon::ThreadPool, c: &Corpus, kind: SimKind, random: &[PairSample]) -> Result<Vec<BucketTable>> {
    let friends = label_pairs(c, &friend_pairs(c), kind);
    pool.install(|| STUDY_KEYS.par_iter().map(|&key| study_table(c, kind, key, random, &friends)).collect())
}

/// Fits every `(model, task)` combination on one sample set.
pub fn run_models(
    pool: &rayon::ThreadPool,
    samples: &[PairSample],
    combos: &[(ModelKind, Task)],
    params: &TrainParams,
    seed: u64,
) -> Result<Vec<(MetricsReport, Predictor)>> {
    pool.install(|| {
        combos
            .par_iter()
            .map(|&(m, t)| core(run_protocol_with_model(samples, m, t, CategorySet::ALL, params, seed)))
            .collect()
    })
}

/// The protocol over all seven category combinations, in parallel.
pub fn run_ablation(
    pool: &rayon::ThreadPool,
    samples: &[PairSample],
    model: ModelKind,
    task: Task,
    params: &TrainParams,
    seed: u64,
) -> Result<Vec<AblationRow>> {
    let sets = CategorySet::combinations();
    pool.install(|| {
        sets.par_iter()
            .map(|&categories| {
                core(run_protocol(samples, model, task, categories, params, seed)).map(|report| AblationRow { categories, report })
            })
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub users: usize,
    pub videos: usize,
    pub tags: usize,
    pub views: usize,
    pub friendships: usize,
    pub memberships: usize,
    pub message_records: usize,
    pub day0_active: usize,
}

impl CorpusSummary {
    pub fn of(c: &Corpus) -> Self {
        CorpusSummary {
            users: c.n_users(),
            videos: c.n_videos(),
            tags: c.n_tags(),
            views: c.views().len(),
            friendships: c.friends().len(),
            memberships: c.memberships().len(),
            message_records: c.messages().len(),
            day0_active: c.active_indices(&DayWindow::TODAY).len(),
        }
    }
}

/// Past-window coverage of day-0 actives and the correlation of past and
/// day-0 similarity, per window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub kind: SimKind,
    pub window: String,
    pub coverage: f64,
    pub pearson: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub corpus: CorpusSummary,
    pub metrics: Vec<MetricsReport>,
    pub ablation: Vec<AblationRow>,
    pub coverage: Vec<CoverageRow>,
    pub recommendation: Vec<ReportRow>,
}

/// Everything a pipeline run computed, with stage wall times (never
/// written to disk, since they vary between runs).
#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: PipelineReport,
    pub studies: Vec<(SimKind, BucketTable)>,
    pub stage_seconds: Vec<(String, f64)>,
}

struct Stages(Vec<(String, f64)>, Instant);

impl Stages {
    fn done(&mut self, name: &str) {
        let secs = self.1.elapsed().as_secs_f64();
        info!("stage {name}: {secs:.1}s");
        self.0.push((String::from(name), secs));
        self.1 = Instant::now();
    }
}

/// Strategy names of the recommendation grid for the given profile kinds.
pub fn pipeline_strategies<'a>(kinds: &[SimKind], predictors: &'a [(SimKind, Predictor)]) -> Vec<Strategy<'a>> {
    let mut out: Vec<Strategy<'a>> =
        predictors.iter().map(|(kind, model)| Strategy::PredictedSim { kind: *kind, model }).collect();
    out.extend(kinds.iter().map(|&k| Strategy::OracleSim(k)));
    out.extend(kinds.iter().map(|&k| Strategy::PastLongTerm(k)));
    out.extend([Strategy::DemographicSim, Strategy::FriendFilter, Strategy::RandomK, Strategy::GlobalPopularity]);
    out
}

/// generate → profile → featurize → train/evaluate → ablation → study →
/// recommend, all outputs under `out`.
pub fn run_pipeline(s: &mut Settings, out: &Path, pool: &rayon::ThreadPool) -> Result<PipelineOutcome> {
    let mut stages = Stages(Vec::new(), Instant::now());
    let gen = gen_config(s)?;
    let seed = gen.seed;
    s.set("seed", seed);
    let kinds: Vec<SimKind> = parse_list(&s.get_or("kinds", String::from("ptp,rtp"))?)?;
    if kinds.is_empty() {
        bail!("`kinds` lists no profile kind");
    }
    let models: Vec<ModelKind> = parse_list(&s.get_or("models", ModelKind::ALL.map(|m| m.name()).join(","))?)?;
    let ablation_model: ModelKind = s.get_or("ablation-model", String::from("tree"))?.parse().map_err(|e| anyhow!("{e}"))?;
    let rec_model: ModelKind = s.get_or("rec-model", String::from("hybrid"))?.parse().map_err(|e| anyhow!("{e}"))?;
    let n_pairs: usize = s.get_or("pairs", 100_000usize)?;
    let window: DayWindow = s.get_or("window", DayWindow::PAST_WEEK)?;
    let params = train_params(s)?;
    let rec_cfg = experiment_config(s, seed)?;
    let mut manifest = ManifestBuilder::new("pipeline", out, s.snapshot());

    let (c, _) = core(generate(&gen))?;
    for (path, sha) in write_corpus(&c, &out.join("corpus"))? {
        manifest.record_output(&path, sha);
    }
    info!("corpus: {} users, {} views, {} friendships", c.n_users(), c.views().len(), c.friends().len());
    stages.done("generate");

    for &kind in &kinds {
        manifest.output(&out.join(format!("profiles-{kind}.jsonl")), &profiles_jsonl(&c, kind, &window)?)?;
    }
    stages.done("profile");

    let mut samples = Vec::new();
    for &kind in &kinds {
        let set = core(build_training_set(&c, n_pairs, kind, seed))?;
        manifest.output(&out.join(format!("samples-{kind}.csv")), &samples_csv(&set)?)?;
        samples.push(set);
    }
    stages.done("featurize");

    let mut combos: Vec<(ModelKind, Task)> = Vec::new();
    for task in [Task::Classification, Task::Regression] {
        combos.extend(models.iter().map(|&m| (m, task)));
    }
    if !combos.contains(&(rec_model, Task::Regression)) {
        combos.push((rec_model, Task::Regression));
    }
    let mut metrics = Vec::new();
    let mut predictors: Vec<(SimKind, Predictor)> = Vec::new();
    for (&kind, set) in kinds.iter().zip(&samples) {
        for (report, predictor) in run_models(pool, set, &combos, &params, seed)? {
            info!("{}", crate::formats::describe(&report));
            if report.model == rec_model && report.task == Task::Regression {
                let file = ModelFile::new(kind, report.train_mean, report.n_train, predictor.clone());
                manifest.output(&out.join("models").join(format!("{rec_model}-{kind}-reg.json")), &file.to_json()?)?;
                predictors.push((kind, predictor));
            }
            if models.contains(&report.model) {
                metrics.push(report);
            }
        }
    }
    manifest.output(&out.join("metrics.csv"), &metrics_csv(&metrics)?)?;
    stages.done("models");

    let mut ablation = Vec::new();
    for set in &samples {
        ablation.extend(run_ablation(pool, set, ablation_model, Task::Classification, &params, seed)?);
    }
    manifest.output(&out.join("ablation.csv"), &ablation_csv(&ablation)?)?;
    stages.done("ablation");

    let mut studies = Vec::new();
    let mut coverage = Vec::new();
    for (&kind, set) in kinds.iter().zip(&samples) {
        for t in study_all(pool, &c, kind, set)? {
            studies.push((kind, t));
        }
        if let Some(pk) = kind.tag_kind() {
            let idx: Vec<(usize, usize)> = set
                .iter()
                .map(|p| Ok((core(c.require_user(p.target))?, core(c.require_user(p.helper))?)))
                .collect::<Result<_>>()?;
            let rows = core(coverage_and_correlation(&c, &idx, pk))?;
            for (w, (cov, r)) in [DayWindow::PAST_DAY, DayWindow::PAST_WEEK, DayWindow::PAST_MONTH].iter().zip(rows) {
                coverage.push(CoverageRow { kind: pk.into(), window: w.to_string(), coverage: cov, pearson: r });
            }
        }
    }
    let tables: Vec<(SimKind, &BucketTable)> = studies.iter().map(|(k, t)| (*k, t)).collect();
    manifest.output(&out.join("study.csv"), &bucket_csv(&tables)?)?;
    stages.done("study");

    let mut recommendation = Vec::new();
    for strategy in pipeline_strategies(&kinds, &predictors) {
        let rows = run_recommendation(pool, &c, &strategy, &rec_cfg)?;
        if let Some(r) = rows.iter().find(|r| r.n == 10) {
            info!("{} K={} N=10: F={:.4} D={:.4}", r.strategy, r.k, r.f_measure, r.diversification);
        }
        recommendation.extend(rows);
    }
    manifest.output(&out.join("rec.csv"), &recommendation_csv(&recommendation)?)?;
    stages.done("recommend");

    let report = PipelineReport { seed, corpus: CorpusSummary::of(&c), metrics, ablation, coverage, recommendation };
    manifest.output(&out.join("report.json"), &json_bytes(&report)?)?;
    manifest.finish()?;
    Ok(PipelineOutcome { report, studies, stage_seconds: stages.0 })
}

/// The user ids of a dense-index pair list.
pub fn id_pairs(c: &Corpus, pairs: &[(usize, usize)]) -> Vec<(UserId, UserId)> {
    pairs.iter().map(|&(a, b)| (c.user_at(a).id, c.user_at(b).id)).collect()
}

/// `ProfileKind` of a tag-based similarity kind, or an error for VBP.
pub fn tag_kind(kind: SimKind) -> Result<ProfileKind> {
    kind.tag_kind().ok_or_else(|| anyhow!("`{kind}` is not a tag-based profile kind"))
}
