//! Artifact formats: profiles (JSON lines), pair samples (CSV), model files
//! (versioned JSON) and the CSV tables of studies and experiments.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use tagsim_core::corpus::{CityId, Corpus, DayWindow, UserId};
use tagsim_core::evalkit::{AblationRow, BucketTable, MetricsReport};
use tagsim_core::mlcore::Task;
use tagsim_core::model::{ModelKind, Predictor};
use tagsim_core::pairfeat::{CategorySet, FeatureRecord, GenderPair, PairSample, SAMPLE_COLUMNS};
use tagsim_core::profiling::{ProfileSet, SimKind};
use tagsim_core::recommend::ReportRow;

/// Shortest plain or scientific rendering with at most 9 significant digits.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { String::from("NaN") } else if x == 0.0 { String::from("0") } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..9).contains(&exp) {
        let prec = (8 - exp).max(0) as usize;
        format!("{x:.prec$}")
    } else {
        format!("{x:.8e}")
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mantissa, exponent) = match s.find('e') {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let m = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
    format!("{m}{exponent}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| anyhow!("flushing CSV: {e}"))
}

/// One JSON object per user: id, kind, window and sparse weights keyed by tag
/// id (video id for VBP). Lines follow user id order.
pub fn profiles_jsonl(c: &Corpus, kind: SimKind, window: &DayWindow) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Line<'a> {
        id: UserId,
        kind: &'a str,
        window: String,
        weights: Vec<(u32, f64)>,
    }
    let set = ProfileSet::build(c, kind, window);
    let mut out = Vec::new();
    for u in 0..c.n_users() {
        let weights = set
            .vector(u)
            .iter()
            .map(|&(i, w)| match kind {
                SimKind::Vbp => (c.video_at(i as usize).id.0, w),
                _ => (c.tag_at(i as usize).0, w),
            })
            .collect();
        let line = Line { id: c.user_at(u).id, kind: kind.name(), window: window.to_string(), weights };
        serde_json::to_writer(&mut out, &line)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn samples_csv(samples: &[PairSample]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(SAMPLE_COLUMNS)?;
    for s in samples {
        let f = &s.features;
        w.write_record([
            s.target.to_string(),
            s.helper.to_string(),
            s.kind.name().to_string(),
            f.gender_pair.name().to_string(),
            f.age_target.to_string(),
            f.age_helper.to_string(),
            f.city_target.to_string(),
            f.city_helper.to_string(),
            flag(f.same_city).to_string(),
            flag(f.friendship).to_string(),
            fmt_sig9(f.common_friend_ratio),
            f.common_groups.to_string(),
            f.msg_count_month.to_string(),
            f.msg_days_month.to_string(),
            fmt_sig9(f.past_sim_month),
            flag(f.has_past).to_string(),
            fmt_sig9(f.helper_individuality),
            flag(f.has_individuality).to_string(),
            s.label_sim.map(fmt_sig9).unwrap_or_default(),
            flag(s.label_sim.is_some()).to_string(),
        ])?;
    }
    finish(w)
}

pub fn read_samples_csv(bytes: &[u8], source: &str) -> Result<Vec<PairSample>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = rdr.headers().with_context(|| format!("{source}: reading header"))?.clone();
    if header.iter().ne(SAMPLE_COLUMNS.iter().copied()) {
        bail!("{source}:1: header must be `{}`", SAMPLE_COLUMNS.join(","));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let r = rec.with_context(|| format!("{source}: malformed row"))?;
        let line = r.position().map_or(0, |p| p.line());
        let get = |i: usize| -> &str { r.get(i).unwrap_or("") };
        let num = |i: usize| -> Result<f64> {
            get(i).parse().map_err(|_| anyhow!("{source}:{line}: column {} is not a number: `{}`", SAMPLE_COLUMNS[i], get(i)))
        };
        let int = |i: usize| -> Result<u32> {
            get(i).parse().map_err(|_| anyhow!("{source}:{line}: column {} is not an integer: `{}`", SAMPLE_COLUMNS[i], get(i)))
        };
        let bit = |i: usize| -> Result<bool> {
            match get(i) {
                "0" => Ok(false),
                "1" => Ok(true),
                v => Err(anyhow!("{source}:{line}: column {} must be 0 or 1, found `{v}`", SAMPLE_COLUMNS[i])),
            }
        };
        let kind: SimKind = get(2).parse().map_err(|e| anyhow!("{source}:{line}: {e}"))?;
        let gender_pair: GenderPair = get(3).parse().map_err(|e| anyhow!("{source}:{line}: {e}"))?;
        let features = FeatureRecord {
            gender_pair,
            age_target: int(4)?,
            age_helper: int(5)?,
            city_target: CityId(int(6)?),
            city_helper: CityId(int(7)?),
            same_city: bit(8)?,
            friendship: bit(9)?,
            common_friend_ratio: num(10)?,
            common_groups: int(11)?,
            msg_count_month: int(12)?,
            msg_days_month: int(13)?,
            past_sim_month: num(14)?,
            has_past: bit(15)?,
            helper_individuality: num(16)?,
            has_individuality: bit(17)?,
        };
        let label_sim = if bit(19)? { Some(num(18)?) } else { None };
        out.push(PairSample { target: UserId(int(0)?), helper: UserId(int(1)?), features, label_sim, kind });
    }
    Ok(out)
}

pub const MODEL_FORMAT: &str = "tagsim-model";
pub const MODEL_VERSION: u32 = 1;

/// A trained predictor with what is needed to evaluate it later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub sim_kind: SimKind,
    /// Mean training similarity: the classification threshold and the
    /// regression baseline.
    pub train_mean: f64,
    pub n_train: usize,
    pub predictor: Predictor,
}

impl ModelFile {
    pub fn new(sim_kind: SimKind, train_mean: f64, n_train: usize, predictor: Predictor) -> Self {
        ModelFile { format: String::from(MODEL_FORMAT), version: MODEL_VERSION, sim_kind, train_mean, n_train, predictor }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn from_json(bytes: &[u8], source: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_slice(bytes).with_context(|| format!("{source}: not JSON"))?;
        let format = probe.get("format").and_then(|v| v.as_str()).unwrap_or("");
        let version = probe.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if format != MODEL_FORMAT || version != u64::from(MODEL_VERSION) {
            bail!("{source}: expected {MODEL_FORMAT} version {MODEL_VERSION}, found `{format}` version {version}");
        }
        serde_json::from_value(probe).with_context(|| format!("{source}: invalid model file"))
    }
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn bucket_csv(tables: &[(SimKind, &BucketTable)]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(["kind", "key", "order", "label", "mean", "count", "se"])?;
    for (kind, t) in tables {
        for r in &t.rows {
            w.write_record([
                kind.name().to_string(),
                t.key.name().to_string(),
                r.order.to_string(),
                r.label.clone(),
                fmt_sig9(r.mean),
                r.count.to_string(),
                fmt_sig9(r.se),
            ])?;
        }
    }
    finish(w)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig9).unwrap_or_default()
}

pub fn metrics_csv(reports: &[MetricsReport]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(["kind", "model", "task", "categories", "n_train", "n_test", "train_mean", "auc", "reduced_mae_pct", "mae"])?;
    for r in reports {
        w.write_record([
            r.kind.name().to_string(),
            r.model.name().to_string(),
            r.task.name().to_string(),
            r.categories.to_string(),
            r.n_train.to_string(),
            r.n_test.to_string(),
            fmt_sig9(r.train_mean),
            opt(r.auc),
            opt(r.reduced_mae_pct),
            opt(r.mae),
        ])?;
    }
    finish(w)
}

pub fn ablation_csv(rows: &[AblationRow]) -> Result<Vec<u8>> {
    let reports: Vec<MetricsReport> = rows.iter().map(|r| r.report.clone()).collect();
    metrics_csv(&reports)
}

pub fn recommendation_csv(rows: &[ReportRow]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(["strategy", "k", "n", "precision", "recall", "f_measure", "diversification", "n_targets"])?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.k.to_string(),
            r.n.to_string(),
            fmt_sig9(r.precision),
            fmt_sig9(r.recall),
            fmt_sig9(r.f_measure),
            fmt_sig9(r.diversification),
            r.n_targets.to_string(),
        ])?;
    }
    finish(w)
}

/// Human-readable one-line summary of a metrics report.
pub fn describe(r: &MetricsReport) -> String {
    let mut s = format!("{} {} {} [{}]", r.kind, r.model, r.task.name(), r.categories);
    match r.task {
        Task::Classification => write!(s, " auc={}", opt(r.auc)).ok(),
        Task::Regression => write!(s, " reduced_mae={}%", opt(r.reduced_mae_pct)).ok(),
    };
    s
}

/// Model kinds and their category set as a compact label.
pub fn model_label(kind: ModelKind, categories: CategorySet) -> String {
    format!("{kind}[{categories}]")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(0.5), "0.5");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456.789123), "123456.789");
        assert_eq!(fmt_sig9(-2.0), "-2");
        assert_eq!(fmt_sig9(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig9(6.02214076e23), "6.02214076e23");
        for x in [0.1, 1.0 / 7.0, 0.987654321987, 3.0e-6] {
            let back: f64 = fmt_sig9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-8, "{x}");
        }
    }
}
