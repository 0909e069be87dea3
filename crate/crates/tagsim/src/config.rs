//! `key=value` run configuration: presets, then the config file, then flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Keys that never reach the manifest snapshot: they change where or how
/// fast a run happens, not what it computes. Input contents are covered by
/// the manifest's checksums instead.
const VOLATILE: [&str; 9] = ["threads", "config", "out", "corpus", "in", "test", "report", "model-file", "log"];

/// Merged settings. Later layers overwrite earlier ones key by key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Settings {
    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("{source}:{}: expected key=value, found `{line}`", i + 1))?;
            if k.trim().is_empty() {
                bail!("{source}:{}: empty key", i + 1);
            }
            s.set(k, v.trim());
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Settings::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.values.insert(normalize(key), value.to_string());
    }

    pub fn set_opt<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// Overlays `other` on top of `self`.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("invalid value `{v}` for `{key}`: {e}")))
            .transpose()
    }

    /// The value of `key`, recording `default` when it is absent so that the
    /// snapshot lists every effective setting.
    pub fn get_or<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.set(key, &default);
                Ok(default)
            }
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| anyhow!("missing required setting `{key}`"))
    }

    pub fn flag(&mut self, key: &str) -> Result<bool> {
        self.get_or(key, false)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Settings that determine outputs, sorted by key.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.values.iter().filter(|(k, _)| !VOLATILE.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-desk" => Settings::parse(PAPER_DESK, "preset paper-desk"),
            _ => bail!("unknown preset `{name}`; available: paper-desk"),
        }
    }
}

/// The desk-scale benchmark: a 5k-user corpus, 10^5 pairs per profile kind,
/// all six models on both tasks, the ablation sweep and the recommendation grid.
pub const PAPER_DESK: &str = "\
preset = paper-desk
users = 5000
videos = 2000
tags = 300
topics = 20
pairs = 100000
models = linear,l1linear,tree,forest,gbdt,hybrid
kinds = ptp,rtp
ablation-model = tree
rec-targets = 2000
rec-candidates = 5000
K = 15
N = 10..100
";

/// `A..B` with step 10 when `A` is 10 (N grid shorthand), `A..B:S` with an
/// explicit step, or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    let out: Vec<usize> = if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, st)) => (b, st.trim().parse::<usize>()?),
            None => (rest, 0),
        };
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        let step = if step == 0 { if a >= 10 && a % 10 == 0 { 10 } else { 1 } } else { step };
        if a > b {
            bail!("empty range `{s}`");
        }
        (a..=b).step_by(step).collect()
    } else {
        s.split(',').map(|v| v.trim().parse::<usize>().map_err(|e| anyhow!("bad grid value `{v}`: {e}"))).collect::<Result<_>>()?
    };
    if out.is_empty() || out.contains(&0) {
        bail!("grid `{s}` must list positive values");
    }
    Ok(out)
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    s.split(',').map(str::trim).filter(|v| !v.is_empty()).map(|v| v.parse::<T>().map_err(|e| anyhow!("`{v}`: {e}"))).collect()
}
