//! Corpus CSV files and content checksums.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

use tagsim_core::corpus::{
    AgeFilter, CityId, Corpus, CorpusParts, FriendEdge, Gender, GroupId, GroupMembership, LoadReport, MessageRecord, TagId,
    UserId, UserRecord, VideoId, VideoRecord, ViewEvent,
};

pub const USERS: &str = "users.csv";
pub const VIDEOS: &str = "videos.csv";
pub const VIEWS: &str = "views.csv";
pub const FRIENDS: &str = "friends.csv";
pub const GROUPS: &str = "groups.csv";
pub const MESSAGES: &str = "messages.csv";

/// The six corpus files in write order.
pub const CORPUS_FILES: [&str; 6] = [USERS, VIDEOS, VIEWS, FRIENDS, GROUPS, MESSAGES];

const HEADERS: [(&str, &[&str]); 6] = [
    (USERS, &["user_id", "gender", "age", "city_id"]),
    (VIDEOS, &["video_id", "tags"]),
    (VIEWS, &["user_id", "video_id", "day"]),
    (FRIENDS, &["user_a", "user_b"]),
    (GROUPS, &["user_id", "group_id"]),
    (MESSAGES, &["user_a", "user_b", "day", "count"]),
];

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn header_of(file: &str) -> &'static [&'static str] {
    HEADERS.iter().find(|(f, _)| *f == file).map(|(_, h)| *h).expect("known corpus file")
}

/// Rows of one file with their 1-based line numbers, after a header check.
fn read_rows(dir: &Path, file: &str) -> Result<Vec<(u64, csv::StringRecord)>> {
    let path = dir.join(file);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&path)
        .with_context(|| format!("opening {}", path.display()))?;
    let expected = header_of(file);
    let header = rdr.headers().with_context(|| format!("{file}: reading header"))?.clone();
    if header.iter().ne(expected.iter().copied()) {
        bail!("{file}:1: header must be `{}`, found `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(","));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("{file}: malformed row"))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != expected.len() {
            bail!("{file}:{line}: expected {} fields, found {}", expected.len(), rec.len());
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(file: &str, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = &rec[i];
    raw.parse().map_err(|_| anyhow!("{file}:{line}: invalid {name} `{raw}`"))
}

/// Reads the six corpus files from `dir` and builds a validated corpus.
pub fn read_corpus_parts(dir: &Path) -> Result<CorpusParts> {
    let mut parts = CorpusParts::default();
    for (line, r) in read_rows(dir, USERS)? {
        let gender = Gender::from_code(&r[1]).ok_or_else(|| anyhow!("{USERS}:{line}: gender must be M or F, found `{}`", &r[1]))?;
        parts.users.push(UserRecord {
            id: UserId(field(USERS, line, &r, 0, "user_id")?),
            gender,
            age: field(USERS, line, &r, 2, "age")?,
            city: CityId(field(USERS, line, &r, 3, "city_id")?),
        });
    }
    for (line, r) in read_rows(dir, VIDEOS)? {
        let tags = r[1]
            .split('|')
            .filter(|t| !t.is_empty())
            .map(|t| t.trim().parse().map(TagId).map_err(|_| anyhow!("{VIDEOS}:{line}: invalid tag id `{t}`")))
            .collect::<Result<Vec<_>>>()?;
        parts.videos.push(VideoRecord { id: VideoId(field(VIDEOS, line, &r, 0, "video_id")?), tags });
    }
    for (line, r) in read_rows(dir, VIEWS)? {
        parts.views.push(ViewEvent {
            user: UserId(field(VIEWS, line, &r, 0, "user_id")?),
            video: VideoId(field(VIEWS, line, &r, 1, "video_id")?),
            day: field(VIEWS, line, &r, 2, "day")?,
        });
    }
    for (line, r) in read_rows(dir, FRIENDS)? {
        let a = UserId(field(FRIENDS, line, &r, 0, "user_a")?);
        let b = UserId(field(FRIENDS, line, &r, 1, "user_b")?);
        parts.friends.push(FriendEdge::new(a, b).map_err(|e| anyhow!("{FRIENDS}:{line}: {e}"))?);
    }
    for (line, r) in read_rows(dir, GROUPS)? {
        parts.memberships.push(GroupMembership {
            user: UserId(field(GROUPS, line, &r, 0, "user_id")?),
            group: GroupId(field(GROUPS, line, &r, 1, "group_id")?),
        });
    }
    for (line, r) in read_rows(dir, MESSAGES)? {
        let a: u32 = field(MESSAGES, line, &r, 0, "user_a")?;
        let b: u32 = field(MESSAGES, line, &r, 1, "user_b")?;
        if a == b {
            bail!("{MESSAGES}:{line}: messages need two distinct users");
        }
        parts.messages.push(MessageRecord {
            a: UserId(a.min(b)),
            b: UserId(a.max(b)),
            day: field(MESSAGES, line, &r, 2, "day")?,
            count: field(MESSAGES, line, &r, 3, "count")?,
        });
    }
    Ok(parts)
}

pub fn read_corpus(dir: &Path, filter: AgeFilter) -> Result<(Corpus, LoadReport)> {
    let parts = read_corpus_parts(dir)?;
    Corpus::build(parts, filter).with_context(|| format!("validating corpus in {}", dir.display()))
}

/// CSV text of each corpus file, rows sorted by their key columns.
pub fn corpus_csv(c: &Corpus) -> Result<Vec<(&'static str, Vec<u8>)>> {
    fn table(file: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header_of(file))?;
        for r in rows {
            w.write_record(&r)?;
        }
        Ok(w.into_inner().map_err(|e| anyhow!("flushing {file}: {e}"))?)
    }
    let mut views = c.views().to_vec();
    views.sort_by_key(|v| (v.user, v.video, v.day));
    let mut memberships = c.memberships().to_vec();
    memberships.sort();
    let mut friends = c.friends().to_vec();
    friends.sort();
    let mut messages = c.messages().to_vec();
    messages.sort_by_key(|m| (m.a, m.b, m.day));
    Ok(vec![
        (
            USERS,
            table(
                USERS,
                c.users().iter().map(|u| vec![u.id.to_string(), u.gender.code().to_string(), u.age.to_string(), u.city.to_string()]),
            )?,
        ),
        (
            VIDEOS,
            table(
                VIDEOS,
                c.videos().iter().map(|v| {
                    let tags: Vec<String> = v.tags.iter().map(ToString::to_string).collect();
                    vec![v.id.to_string(), tags.join("|")]
                }),
            )?,
        ),
        (VIEWS, table(VIEWS, views.iter().map(|v| vec![v.user.to_string(), v.video.to_string(), v.day.to_string()]))?),
        (FRIENDS, table(FRIENDS, friends.iter().map(|f| vec![f.a.to_string(), f.b.to_string()]))?),
        (GROUPS, table(GROUPS, memberships.iter().map(|m| vec![m.user.to_string(), m.group.to_string()]))?),
        (
            MESSAGES,
            table(
                MESSAGES,
                messages.iter().map(|m| vec![m.a.to_string(), m.b.to_string(), m.day.to_string(), m.count.to_string()]),
            )?,
        ),
    ])
}

/// Writes the six corpus files into `dir`; returns `(path, sha256)` per file.
pub fn write_corpus(c: &Corpus, dir: &Path) -> Result<Vec<(PathBuf, String)>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    corpus_csv(c)?
        .into_iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            write_file(&path, &bytes)?;
            Ok((path, sha256_hex(&bytes)))
        })
        .collect()
}
