//! Command line: argument parsing, settings layering and the subcommands.
//!
//! Every flag maps to a settings key of the same name; a `--config` file
//! supplies the same keys as `key=value` lines and flags override it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use tagsim_core::corpus::{AgeFilter, Corpus, DayWindow};
use tagsim_core::evalkit::{auc, bucket_similarity, mae, reduced_mae_ratio, BinaryLabeling, BucketKey, MetricsReport};
use tagsim_core::mlcore::Task;
use tagsim_core::model::{ModelKind, Predictor};
use tagsim_core::pairfeat::{build_training_set, CategorySet};
use tagsim_core::profiling::SimKind;
use tagsim_core::recommend::Strategy;
use tagsim_core::synthgen::generate;

use crate::config::Settings;
use crate::formats::{bucket_csv, json_bytes, profiles_jsonl, read_samples_csv, recommendation_csv, samples_csv, ModelFile};
use crate::io::{read_corpus, write_corpus, CORPUS_FILES};
use crate::manifest::{manifest_beside, ManifestBuilder};
use crate::pipeline::{
    experiment_config, friend_pairs, gen_config, id_pairs, run_pipeline, run_recommendation, thread_pool, train_params,
};

#[derive(Debug, Parser)]
#[command(name = "tagsim", version, about = "Tag-based interest similarity: profiles, pair models and cold-start recommendation")]
pub struct Cli {
    /// key=value settings file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel stages (outputs do not depend on it)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed of every random draw
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus directory
    Generate(GenerateArgs),
    /// Write per-user tag or video profiles as JSON lines
    Profile(ProfileArgs),
    /// Sample labelled user pairs and write their features
    Featurize(FeaturizeArgs),
    /// Fit a model on a samples file
    Train(TrainArgs),
    /// Score a model file on a samples file
    Evaluate(EvaluateArgs),
    /// Mean similarity per bucket of a pair attribute
    Study(StudyArgs),
    /// Cold-start top-N recommendation experiment
    Recommend(RecommendArgs),
    /// Run every stage end to end into one directory
    Pipeline(PipelineArgs),
}

#[derive(Debug, Default, Args)]
pub struct Knobs {
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub videos: Option<usize>,
    #[arg(long)]
    pub tags: Option<usize>,
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long)]
    pub cities: Option<usize>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub zipf_exponent: Option<f64>,
    #[arg(long)]
    pub video_zipf: Option<f64>,
    #[arg(long)]
    pub friend_interest: Option<f64>,
    #[arg(long)]
    pub message_interest: Option<f64>,
    #[arg(long)]
    pub group_topic: Option<f64>,
    #[arg(long)]
    pub gender_topic_skew: Option<f64>,
    #[arg(long)]
    pub age_topic: Option<f64>,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub view_rate: Option<f64>,
    #[arg(long)]
    pub inactivity_fraction: Option<f64>,
    #[arg(long)]
    pub mean_degree: Option<f64>,
    #[arg(long)]
    pub groups_per_user: Option<f64>,
    #[arg(long)]
    pub same_city_odds: Option<f64>,
    /// Zero every homophily knob and the interest drift
    #[arg(long)]
    pub null: bool,
}

impl Knobs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("users", self.users);
        s.set_opt("videos", self.videos);
        s.set_opt("tags", self.tags);
        s.set_opt("topics", self.topics);
        s.set_opt("cities", self.cities);
        s.set_opt("groups", self.groups);
        s.set_opt("zipf-exponent", self.zipf_exponent);
        s.set_opt("video-zipf", self.video_zipf);
        s.set_opt("friend-interest", self.friend_interest);
        s.set_opt("message-interest", self.message_interest);
        s.set_opt("group-topic", self.group_topic);
        s.set_opt("gender-topic-skew", self.gender_topic_skew);
        s.set_opt("age-topic", self.age_topic);
        s.set_opt("drift", self.drift);
        s.set_opt("view-rate", self.view_rate);
        s.set_opt("inactivity-fraction", self.inactivity_fraction);
        s.set_opt("mean-degree", self.mean_degree);
        s.set_opt("groups-per-user", self.groups_per_user);
        s.set_opt("same-city-odds", self.same_city_odds);
        if self.null {
            s.set("null", true);
        }
    }
}

/// Corpus location and the age range kept on load.
#[derive(Debug, Default, Args)]
pub struct CorpusArgs {
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub min_age: Option<u32>,
    #[arg(long)]
    pub max_age: Option<u32>,
}

impl CorpusArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("corpus", self.corpus.as_ref().map(|p| p.display()));
        s.set_opt("min-age", self.min_age);
        s.set_opt("max-age", self.max_age);
    }
}

/// Hyperparameters exposed for quick runs; defaults are the benchmark's.
#[derive(Debug, Default, Args)]
pub struct TrainKnobs {
    #[arg(long)]
    pub gbdt_trees: Option<usize>,
    #[arg(long)]
    pub forest_trees: Option<usize>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
    #[arg(long)]
    pub prune_folds: Option<usize>,
    #[arg(long)]
    pub grid_len: Option<usize>,
    #[arg(long)]
    pub min_ratio: Option<f64>,
}

impl TrainKnobs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("gbdt-trees", self.gbdt_trees);
        s.set_opt("forest-trees", self.forest_trees);
        s.set_opt("cv-folds", self.cv_folds);
        s.set_opt("prune-folds", self.prune_folds);
        s.set_opt("grid-len", self.grid_len);
        s.set_opt("min-ratio", self.min_ratio);
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: Knobs,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// ptp, rtp or vbp
    #[arg(long)]
    pub kind: Option<String>,
    /// Day range FIRST:LAST, e.g. -7:-1
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// hybrid, gbdt, forest, tree, linear or l1linear
    #[arg(long)]
    pub model: Option<String>,
    /// clf or reg
    #[arg(long)]
    pub task: Option<String>,
    /// Feature categories: all, or a +-joined subset of demographic, social, interest
    #[arg(long)]
    pub categories: Option<String>,
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: TrainKnobs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub kind: Option<String>,
    /// gender, agepair, samecity, friendship, msgcount, msgdays, cfr, groups,
    /// groupsfriendship, individuality or selfsim
    #[arg(long)]
    pub key: Option<String>,
    /// random, friends or mixed (random plus friends)
    #[arg(long)]
    pub population: Option<String>,
    /// Random pairs drawn for the random and mixed populations
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Model file, required by the predicted-* strategies
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// predicted-ptp, predicted-rtp, predicted-vbp, oracle, demo, friends,
    /// past, random or popular
    #[arg(long)]
    pub strategy: Option<String>,
    /// Profile kind of the oracle and past strategies
    #[arg(long)]
    pub kind: Option<String>,
    /// Neighbour counts: a value, a comma list or a range A..B[:STEP]
    #[arg(long = "K", alias = "k")]
    pub k: Option<String>,
    /// List lengths, same forms as K
    #[arg(long = "N", alias = "n")]
    pub n: Option<String>,
    #[arg(long)]
    pub targets: Option<usize>,
    #[arg(long)]
    pub candidates: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Named bundle of settings underneath the config file (paper-desk)
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Comma list of profile kinds
    #[arg(long)]
    pub kinds: Option<String>,
    /// Comma list of model kinds
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long = "K", alias = "k")]
    pub k: Option<String>,
    #[arg(long = "N", alias = "n")]
    pub n: Option<String>,
    #[arg(long)]
    pub rec_targets: Option<usize>,
    #[arg(long)]
    pub rec_candidates: Option<usize>,
    #[command(flatten)]
    pub knobs: Knobs,
    #[command(flatten)]
    pub train: TrainKnobs,
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

/// Flags of the chosen subcommand as settings, and the subcommand name.
fn flag_settings(cli: &Cli) -> (Settings, &'static str) {
    let mut s = Settings::default();
    s.set_opt("seed", cli.seed);
    s.set_opt("threads", cli.threads);
    let name = match &cli.command {
        Command::Generate(a) => {
            s.set_opt("out", path_str(&a.out));
            a.knobs.apply(&mut s);
            "generate"
        }
        Command::Profile(a) => {
            a.corpus.apply(&mut s);
            s.set_opt("kind", a.kind.as_ref());
            s.set_opt("window", a.window.as_ref());
            s.set_opt("out", path_str(&a.out));
            "profile"
        }
        Command::Featurize(a) => {
            a.corpus.apply(&mut s);
            s.set_opt("kind", a.kind.as_ref());
            s.set_opt("pairs", a.pairs);
            s.set_opt("out", path_str(&a.out));
            "featurize"
        }
        Command::Train(a) => {
            s.set_opt("model", a.model.as_ref());
            s.set_opt("task", a.task.as_ref());
            s.set_opt("categories", a.categories.as_ref());
            s.set_opt("in", path_str(&a.input));
            s.set_opt("out", path_str(&a.out));
            a.knobs.apply(&mut s);
            "train"
        }
        Command::Evaluate(a) => {
            s.set_opt("model-file", path_str(&a.model));
            s.set_opt("test", path_str(&a.test));
            s.set_opt("task", a.task.as_ref());
            s.set_opt("report", path_str(&a.report));
            "evaluate"
        }
        Command::Study(a) => {
            a.corpus.apply(&mut s);
            s.set_opt("kind", a.kind.as_ref());
            s.set_opt("key", a.key.as_ref());
            s.set_opt("population", a.population.as_ref());
            s.set_opt("pairs", a.pairs);
            s.set_opt("out", path_str(&a.out));
            "study"
        }
        Command::Recommend(a) => {
            a.corpus.apply(&mut s);
            s.set_opt("model-file", path_str(&a.model));
            s.set_opt("strategy", a.strategy.as_ref());
            s.set_opt("kind", a.kind.as_ref());
            s.set_opt("K", a.k.as_ref());
            s.set_opt("N", a.n.as_ref());
            s.set_opt("rec-targets", a.targets);
            s.set_opt("rec-candidates", a.candidates);
            s.set_opt("report", path_str(&a.report));
            "recommend"
        }
        Command::Pipeline(a) => {
            s.set_opt("preset", a.preset.as_ref());
            s.set_opt("out", path_str(&a.out));
            s.set_opt("pairs", a.pairs);
            s.set_opt("kinds", a.kinds.as_ref());
            s.set_opt("models", a.models.as_ref());
            s.set_opt("K", a.k.as_ref());
            s.set_opt("N", a.n.as_ref());
            s.set_opt("rec-targets", a.rec_targets);
            s.set_opt("rec-candidates", a.rec_candidates);
            a.knobs.apply(&mut s);
            a.train.apply(&mut s);
            "pipeline"
        }
    };
    (s, name)
}

/// Preset (pipeline only), then config file, then flags.
pub fn resolve_settings(cli: &Cli) -> Result<(Settings, &'static str)> {
    let (flags, name) = flag_settings(cli);
    let file = cli.config.as_deref().map(Settings::from_file).transpose()?;
    let preset = flags.raw("preset").or_else(|| file.as_ref().and_then(|f| f.raw("preset")));
    let mut s = match preset {
        Some(p) if name == "pipeline" => Settings::preset(p)?,
        Some(_) => bail!("`preset` applies to the pipeline subcommand only"),
        None => Settings::default(),
    };
    if let Some(f) = &file {
        s.merge(f);
    }
    s.merge(&flags);
    Ok((s, name))
}

fn parse_core<T: std::str::FromStr<Err = tagsim_core::Error>>(s: &str) -> Result<T> {
    s.parse().map_err(|e: tagsim_core::Error| anyhow!("`{s}`: {e}"))
}

fn kind_setting(s: &mut Settings) -> Result<SimKind> {
    parse_core(&s.get_or("kind", String::from("ptp"))?)
}

fn task_setting(s: &Settings) -> Result<Option<Task>> {
    match s.raw("task") {
        None => Ok(None),
        Some("clf") | Some("classification") => Ok(Some(Task::Classification)),
        Some("reg") | Some("regression") => Ok(Some(Task::Regression)),
        Some(other) => bail!("task must be clf or reg, found `{other}`"),
    }
}

fn path_setting(s: &Settings, key: &str) -> Result<PathBuf> {
    s.require::<String>(key).map(PathBuf::from)
}

fn load_corpus(s: &mut Settings, manifest: &mut ManifestBuilder) -> Result<Corpus> {
    let dir = path_setting(s, "corpus")?;
    let d = AgeFilter::default();
    let filter = AgeFilter { min: s.get_or("min-age", d.min)?, max: s.get_or("max-age", d.max)? };
    for f in CORPUS_FILES {
        manifest.input(&dir.join(f))?;
    }
    let (c, report) = read_corpus(&dir, filter)?;
    info!("loaded {} users from {} ({report:?})", c.n_users(), dir.display());
    Ok(c)
}

fn manifest_for(command: &str, out: &Path, s: &Settings) -> ManifestBuilder {
    let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
    ManifestBuilder::new(command, &dir, s.snapshot())
}

fn cmd_generate(s: &mut Settings) -> Result<()> {
    let out = path_setting(s, "out")?;
    let cfg = gen_config(s)?;
    s.set("seed", cfg.seed);
    let mut manifest = ManifestBuilder::new("generate", &out, s.snapshot());
    let (c, _) = generate(&cfg).map_err(|e| anyhow!("{e}"))?;
    for (path, sha) in write_corpus(&c, &out)? {
        manifest.record_output(&path, sha);
    }
    manifest.finish()?;
    info!("wrote {} users, {} views to {}", c.n_users(), c.views().len(), out.display());
    Ok(())
}

fn cmd_profile(s: &mut Settings) -> Result<()> {
    let out = path_setting(s, "out")?;
    let kind = kind_setting(s)?;
    let window: DayWindow = parse_core(&s.get_or("window", DayWindow::PAST_WEEK.to_string())?)?;
    let mut manifest = manifest_for("profile", &out, s);
    let c = load_corpus(s, &mut manifest)?;
    manifest.output(&out, &profiles_jsonl(&c, kind, &window)?)?;
    manifest.finish_at(&manifest_beside(&out))?;
    Ok(())
}

fn cmd_featurize(s: &mut Settings) -> Result<()> {
    let out = path_setting(s, "out")?;
    let kind = kind_setting(s)?;
    let pairs: usize = s.get_or("pairs", 100_000usize)?;
    let seed: u64 = s.get_or("seed", 42u64)?;
    let mut manifest = manifest_for("featurize", &out, s);
    let c = load_corpus(s, &mut manifest)?;
    let samples = build_training_set(&c, pairs, kind, seed).map_err(|e| anyhow!("{e}"))?;
    manifest.output(&out, &samples_csv(&samples)?)?;
    manifest.finish_at(&manifest_beside(&out))?;
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<tagsim_core::pairfeat::PairSample>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_samples_csv(&bytes, &path.display().to_string())
}

fn labels_of(samples: &[tagsim_core::pairfeat::PairSample]) -> Result<Vec<f64>> {
    samples.iter().map(|p| p.label_sim.ok_or_else(|| anyhow!("sample ({}, {}) has no label", p.target, p.helper))).collect()
}

/// Fits on every row of the input; held-out scoring is `evaluate`'s job.
fn cmd_train(s: &mut Settings) -> Result<()> {
    let input = path_setting(s, "in")?;
    let out = path_setting(s, "out")?;
    let model: ModelKind = parse_core(&s.get_or("model", String::from("hybrid"))?)?;
    let task = task_setting(s)?.unwrap_or(Task::Regression);
    s.set("task", task.name());
    let categories: CategorySet = parse_core(&s.get_or("categories", String::from("all"))?)?;
    let seed: u64 = s.get_or("seed", 42u64)?;
    let params = tagsim_core::model::TrainParams { seed, ..train_params(s)? };
    let mut manifest = manifest_for("train", &out, s);
    manifest.input(&input)?;
    let samples = read_samples(&input)?;
    let kind = samples.first().map(|p| p.kind).ok_or_else(|| anyhow!("{} holds no samples", input.display()))?;
    if samples.iter().any(|p| p.kind != kind) {
        bail!("{} mixes profile kinds", input.display());
    }
    let sims = labels_of(&samples)?;
    let train_mean = BinaryLabeling::fit(&sims).map_err(|e| anyhow!("{e}"))?;
    let targets = match task {
        Task::Classification => BinaryLabeling::apply(train_mean, &sims).labels.iter().map(|&l| f64::from(u8::from(l))).collect(),
        Task::Regression => sims,
    };
    let records: Vec<_> = samples.iter().map(|p| p.features.clone()).collect();
    let predictor = Predictor::train(model, task, &records, &targets, categories, &params).map_err(|e| anyhow!("{e}"))?;
    manifest.output(&out, &ModelFile::new(kind, train_mean, samples.len(), predictor).to_json()?)?;
    manifest.finish_at(&manifest_beside(&out))?;
    Ok(())
}

fn read_model(path: &Path) -> Result<ModelFile> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    ModelFile::from_json(&bytes, &path.display().to_string())
}

/// Metrics of a model file on labelled samples; classification labels use
/// the model's training mean as threshold.
pub fn evaluate_model(model: &ModelFile, samples: &[tagsim_core::pairfeat::PairSample], seed: u64) -> Result<MetricsReport> {
    let sims = labels_of(samples)?;
    let records: Vec<_> = samples.iter().map(|p| p.features.clone()).collect();
    let p = &model.predictor;
    let pred = p.predict(&records);
    let mut report = MetricsReport {
        model: p.kind,
        task: p.task,
        kind: model.sim_kind,
        categories: p.layout.categories,
        n_train: model.n_train,
        n_test: samples.len(),
        train_mean: model.train_mean,
        auc: None,
        reduced_mae_pct: None,
        mae: None,
        seed,
    };
    let e = |e: tagsim_core::Error| anyhow!("{e}");
    match p.task {
        Task::Classification => {
            report.auc = Some(auc(&pred, &BinaryLabeling::apply(model.train_mean, &sims).labels).map_err(e)?);
        }
        Task::Regression => {
            report.reduced_mae_pct = Some(reduced_mae_ratio(&pred, &sims, model.train_mean).map_err(e)?);
            report.mae = Some(mae(&pred, &sims));
        }
    }
    Ok(report)
}

fn cmd_evaluate(s: &mut Settings) -> Result<()> {
    let model_path = path_setting(s, "model-file")?;
    let test = path_setting(s, "test")?;
    let out = path_setting(s, "report")?;
    let seed: u64 = s.get_or("seed", 42u64)?;
    let mut manifest = manifest_for("evaluate", &out, s);
    manifest.input(&model_path)?;
    manifest.input(&test)?;
    let model = read_model(&model_path)?;
    if let Some(task) = task_setting(s)? {
        if task != model.predictor.task {
            bail!("{} is a {} model, but --task is {}", model_path.display(), model.predictor.task.name(), task.name());
        }
    }
    let samples = read_samples(&test)?;
    if samples.iter().any(|p| p.kind != model.sim_kind) {
        bail!("{} holds samples of another profile kind than the model ({})", test.display(), model.sim_kind);
    }
    let report = evaluate_model(&model, &samples, seed)?;
    info!("{}", crate::formats::describe(&report));
    manifest.output(&out, &json_bytes(&report)?)?;
    manifest.finish_at(&manifest_beside(&out))?;
    Ok(())
}

fn cmd_study(s: &mut Settings) -> Result<()> {
    let out = path_setting(s, "out")?;
    let kind = kind_setting(s)?;
    let key: BucketKey = parse_core(&s.require::<String>("key")?)?;
    let population = s.get_or("population", String::from(crate::pipeline::population_of(key)))?;
    let n_pairs: usize = s.get_or("pairs", 100_000usize)?;
    let seed: u64 = s.get_or("seed", 42u64)?;
    let mut manifest = manifest_for("study", &out, s);
    let c = load_corpus(s, &mut manifest)?;
    let random = || -> Result<Vec<(tagsim_core::corpus::UserId, tagsim_core::corpus::UserId)>> {
        let set = build_training_set(&c, n_pairs, kind, seed).map_err(|e| anyhow!("{e}"))?;
        Ok(set.iter().map(|p| (p.target, p.helper)).collect())
    };
    let pairs = match population.as_str() {
        "random" | "users" => random()?,
        "friends" => id_pairs(&c, &friend_pairs(&c)),
        "mixed" => {
            let mut p = random()?;
            p.extend(id_pairs(&c, &friend_pairs(&c)));
            p
        }
        other => bail!("population must be random, friends or mixed, found `{other}`"),
    };
    let table = bucket_similarity(&c, &pairs, key, kind).map_err(|e| anyhow!("{e}"))?;
    manifest.output(&out, &bucket_csv(&[(kind, &table)])?)?;
    manifest.finish_at(&manifest_beside(&out))?;
    Ok(())
}

fn cmd_recommend(s: &mut Settings, pool: &rayon::ThreadPool) -> Result<()> {
    let out = path_setting(s, "report")?;
    let name = s.get_or("strategy", String::from("popular"))?;
    let seed: u64 = s.get_or("seed", 42u64)?;
    let cfg = experiment_config(s, seed)?;
    let mut manifest = manifest_for("recommend", &out, s);
    let c = load_corpus(s, &mut manifest)?;
    let model = match name.strip_prefix("predicted-") {
        Some(k) => {
            let path = path_setting(s, "model-file").context("predicted strategies need --model")?;
            manifest.input(&path)?;
            let m = read_model(&path)?;
            let k: SimKind = parse_core(k)?;
            if m.sim_kind != k {
                bail!("strategy {name} needs a {k} model, {} is {}", path.display(), m.sim_kind);
            }
            Some(m)
        }
        None => None,
    };
    let kind_for = |s: &mut Settings, base: &str| -> Result<SimKind> {
        match name.strip_prefix(base).and_then(|r| r.strip_prefix('-')) {
            Some(k) => parse_core(k),
            None => kind_setting(s),
        }
    };
    let strategy = match name.as_str() {
        _ if model.is_some() => {
            let m = model.as_ref().expect("checked");
            Strategy::PredictedSim { kind: m.sim_kind, model: &m.predictor }
        }
        n if n.starts_with("oracle") => Strategy::OracleSim(kind_for(s, "oracle")?),
        n if n.starts_with("past") => Strategy::PastLongTerm(kind_for(s, "past")?),
        "demo" => Strategy::DemographicSim,
        "friends" => Strategy::FriendFilter,
        "random" => Strategy::RandomK,
        "popular" => Strategy::GlobalPopularity,
        other => bail!("unknown strategy `{other}`"),
    };
    let rows = run_recommendation(pool, &c, &strategy, &cfg)?;
    manifest.output(&out, &recommendation_csv(&rows)?)?;
    manifest.finish_at(&manifest_beside(&out))?;
    Ok(())
}

fn cmd_pipeline(s: &mut Settings, pool: &rayon::ThreadPool) -> Result<()> {
    let out = path_setting(s, "out")?;
    let outcome = run_pipeline(s, &out, pool)?;
    let total: f64 = outcome.stage_seconds.iter().map(|(_, t)| t).sum();
    info!("pipeline finished in {total:.1}s");
    Ok(())
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let (mut s, name) = resolve_settings(cli)?;
    let threads = s.get::<usize>("threads")?.unwrap_or(1);
    let pool = thread_pool(threads)?;
    match name {
        "generate" => cmd_generate(&mut s),
        "profile" => cmd_profile(&mut s),
        "featurize" => cmd_featurize(&mut s),
        "train" => cmd_train(&mut s),
        "evaluate" => cmd_evaluate(&mut s),
        "study" => cmd_study(&mut s),
        "recommend" => cmd_recommend(&mut s, &pool),
        "pipeline" => cmd_pipeline(&mut s, &pool),
        _ => unreachable!("every subcommand is dispatched"),
    }
}

/// Parses `args` (program name first) and runs: 0 on success or help, 2 on a
/// usage error, 1 when the run fails.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
