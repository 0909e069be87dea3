//! Immutable data model: users, videos, tags and behaviour logs indexed by day.
//!
//! Raw rows go in through [`Corpus::build`], which canonicalizes, validates
//! foreign keys and derives the per-user per-day view index, adjacency lists,
//! group sets and the pair-level message index. After that the corpus is
//! read-only.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(UserId);
id_type!(VideoId);
id_type!(TagId);
id_type!(GroupId);
id_type!(CityId);

/// Earliest day in the horizon; day 0 is the target day.
pub const FIRST_DAY: i32 = -30;
pub const LAST_DAY: i32 = 0;
pub const HORIZON: usize = (LAST_DAY - FIRST_DAY + 1) as usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn code(self) -> char {
        match self {
            Gender::Male => 'M',
            Gender::Female => 'F',
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "M" | "m" => Some(Gender::Male),
            "F" | "f" => Some(Gender::Female),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: UserId,
    pub gender: Gender,
    pub age: u32,
    pub city: CityId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub id: VideoId,
    /// Sorted and deduplicated after [`Corpus::build`].
    pub tags: Vec<TagId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ViewEvent {
    pub user: UserId,
    pub video: VideoId,
    pub day: i32,
}

/// Undirected friendship, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FriendEdge {
    pub a: UserId,
    pub b: UserId,
}

impl FriendEdge {
    pub fn new(x: UserId, y: UserId) -> Result<Self> {
        match x.cmp(&y) {
            core::cmp::Ordering::Less => Ok(FriendEdge { a: x, b: y }),
            core::cmp::Ordering::Greater => Ok(FriendEdge { a: y, b: x }),
            core::cmp::Ordering::Equal => Err(Error::InvalidRecord(format!("self-loop friendship for user {x}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupMembership {
    pub user: UserId,
    pub group: GroupId,
}

/// Messages exchanged by a friend pair on one day, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MessageRecord {
    pub a: UserId,
    pub b: UserId,
    pub day: i32,
    pub count: u32,
}

/// Inclusive range of day indexes inside `[-30, 0]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DayWindow {
    first: i32,
    last: i32,
}

impl DayWindow {
    pub fn new(first: i32, last: i32) -> Result<Self> {
        if first > last || first < FIRST_DAY || last > LAST_DAY {
            return Err(Error::InvalidWindow { first, last });
        }
        Ok(DayWindow { first, last })
    }

    pub fn single(day: i32) -> Result<Self> {
        Self::new(day, day)
    }

    /// The target day.
    pub const TODAY: DayWindow = DayWindow { first: 0, last: 0 };
    pub const PAST_DAY: DayWindow = DayWindow { first: -1, last: -1 };
    pub const PAST_WEEK: DayWindow = DayWindow { first: -7, last: -1 };
    pub const PAST_MONTH: DayWindow = DayWindow { first: -30, last: -1 };

    pub fn first(&self) -> i32 {
        self.first
    }

    pub fn last(&self) -> i32 {
        self.last
    }

    pub fn len(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, day: i32) -> bool {
        self.first <= day && day <= self.last
    }

    pub fn is_subset_of(&self, other: &DayWindow) -> bool {
        other.first <= self.first && self.last <= other.last
    }

    pub fn days(&self) -> impl Iterator<Item = i32> {
        self.first..=self.last
    }
}

impl fmt::Display for DayWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.first, self.last)
    }
}

impl FromStr for DayWindow {
    type Err = Error;

    /// Accepts `first:last` or a single day.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidRecord(format!("cannot parse day window `{s}`"));
        match s.split_once(':') {
            Some((a, b)) => {
                let first = a.trim().parse().map_err(|_| bad())?;
                let last = b.trim().parse().map_err(|_| bad())?;
                DayWindow::new(first, last)
            }
            None => DayWindow::single(s.trim().parse().map_err(|_| bad())?),
        }
    }
}

/// Inclusive age bounds applied at load.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeFilter {
    pub min: u32,
    pub max: u32,
}

impl Default for AgeFilter {
    fn default() -> Self {
        AgeFilter { min: 10, max: 40 }
    }
}

/// Raw, unvalidated rows as read from files or produced by a generator.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusParts {
    pub users: Vec<UserRecord>,
    pub videos: Vec<VideoRecord>,
    pub views: Vec<ViewEvent>,
    pub friends: Vec<FriendEdge>,
    pub memberships: Vec<GroupMembership>,
    pub messages: Vec<MessageRecord>,
}

/// Row counts dropped or merged while building a corpus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Users outside the age bounds.
    pub dropped_age: usize,
    /// Behaviour rows that referenced an age-filtered user.
    pub dropped_dependent: usize,
    /// Repeated `(user, video, day)` view rows.
    pub duplicate_views: usize,
    /// Repeated friendship or membership rows.
    pub duplicate_edges: usize,
    /// Message rows with a zero count.
    pub zero_messages: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    users: Vec<UserRecord>,
    videos: Vec<VideoRecord>,
    tags: Vec<TagId>,
    views: Vec<ViewEvent>,
    friends: Vec<FriendEdge>,
    memberships: Vec<GroupMembership>,
    messages: Vec<MessageRecord>,

    user_pos: BTreeMap<UserId, u32>,
    video_pos: BTreeMap<VideoId, u32>,
    tag_pos: BTreeMap<TagId, u32>,
    video_tags: Vec<Vec<u32>>,
    // [user * HORIZON + (day - FIRST_DAY)] -> sorted video indexes
    daily_views: Vec<Vec<u32>>,
    adjacency: Vec<Vec<u32>>,
    user_groups: Vec<Vec<GroupId>>,
    pair_messages: BTreeMap<(u32, u32), Vec<(i32, u32)>>,
}

const MAX_OFFENDERS: usize = 10;

struct Dangling {
    count: usize,
    offenders: Vec<String>,
}

impl Dangling {
    fn push(&mut self, what: impl FnOnce() -> String) {
        self.count += 1;
        if self.offenders.len() < MAX_OFFENDERS {
            self.offenders.push(what());
        }
    }
}

impl Corpus {
    /// Validates and indexes raw rows.
    ///
    /// Users outside `filter` are dropped together with every row that
    /// references them. A reference to an id that never existed is a
    /// dangling key and fails the build; so does a message between users who
    /// are not friends.
    pub fn build(parts: CorpusParts, filter: AgeFilter) -> Result<(Corpus, LoadReport)> {
        let mut report = LoadReport::default();
        let mut dangling = Dangling { count: 0, offenders: Vec::new() };

        let mut users = parts.users;
        users.sort_by_key(|u| u.id);
        for w in users.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::InvalidRecord(format!("duplicate user id {}", w[0].id)));
            }
        }
        let mut filtered_out = BTreeSet::new();
        users.retain(|u| {
            let keep = filter.min <= u.age && u.age <= filter.max;
            if !keep {
                filtered_out.insert(u.id);
            }
            keep
        });
        report.dropped_age = filtered_out.len();
        if users.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let user_pos: BTreeMap<UserId, u32> = users.iter().enumerate().map(|(i, u)| (u.id, i as u32)).collect();

        let mut videos = parts.videos;
        videos.sort_by_key(|v| v.id);
        for w in videos.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::InvalidRecord(format!("duplicate video id {}", w[0].id)));
            }
        }
        for v in &mut videos {
            v.tags.sort_unstable();
            v.tags.dedup();
            if v.tags.is_empty() {
                return Err(Error::InvalidRecord(format!("video {} has no tags", v.id)));
            }
        }
        let video_pos: BTreeMap<VideoId, u32> = videos.iter().enumerate().map(|(i, v)| (v.id, i as u32)).collect();
        let tags: Vec<TagId> = videos
            .iter()
            .flat_map(|v| v.tags.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let tag_pos: BTreeMap<TagId, u32> = tags.iter().enumerate().map(|(i, t)| (*t, i as u32)).collect();
        let video_tags = videos.iter().map(|v| v.tags.iter().map(|t| tag_pos[t]).collect()).collect();

        // Resolves a user reference: Some(keep) or records the problem.
        let check_user = |u: UserId, file: &str, dangling: &mut Dangling, dependent: &mut bool| -> bool {
            if user_pos.contains_key(&u) {
                true
            } else {
                if filtered_out.contains(&u) {
                    *dependent = true;
                } else {
                    dangling.push(|| format!("{file}: user {u}"));
                }
                false
            }
        };

        let mut views = Vec::with_capacity(parts.views.len());
        for ev in parts.views {
            if !(FIRST_DAY..=LAST_DAY).contains(&ev.day) {
                return Err(Error::InvalidRecord(format!(
                    "view ({}, {}) on day {} outside [{FIRST_DAY}, {LAST_DAY}]",
                    ev.user, ev.video, ev.day
                )));
            }
            let mut dependent = false;
            let user_ok = check_user(ev.user, "views", &mut dangling, &mut dependent);
            let video_ok = video_pos.contains_key(&ev.video);
            if !video_ok {
                dangling.push(|| format!("views: video {}", ev.video));
            }
            if user_ok && video_ok {
                views.push(ev);
            } else if dependent && video_ok {
                report.dropped_dependent += 1;
            }
        }
        views.sort_unstable_by_key(|e| (e.user, e.day, e.video));
        let before = views.len();
        views.dedup();
        report.duplicate_views = before - views.len();

        let mut friends = Vec::with_capacity(parts.friends.len());
        for e in parts.friends {
            let e = FriendEdge::new(e.a, e.b)?;
            let mut dependent = false;
            let a_ok = check_user(e.a, "friends", &mut dangling, &mut dependent);
            let b_ok = check_user(e.b, "friends", &mut dangling, &mut dependent);
            if a_ok && b_ok {
                friends.push(e);
            } else if dependent {
                report.dropped_dependent += 1;
            }
        }
        friends.sort_unstable();
        let before = friends.len();
        friends.dedup();
        report.duplicate_edges += before - friends.len();

        let mut memberships = Vec::with_capacity(parts.memberships.len());
        for m in parts.memberships {
            let mut dependent = false;
            if check_user(m.user, "groups", &mut dangling, &mut dependent) {
                memberships.push(m);
            } else if dependent {
                report.dropped_dependent += 1;
            }
        }
        memberships.sort_unstable();
        let before = memberships.len();
        memberships.dedup();
        report.duplicate_edges += before - memberships.len();

        let friend_set: BTreeSet<FriendEdge> = friends.iter().copied().collect();
        let mut merged: BTreeMap<(UserId, UserId, i32), u32> = BTreeMap::new();
        for m in parts.messages {
            let e = FriendEdge::new(m.a, m.b)?;
            if !(FIRST_DAY..=-1).contains(&m.day) {
                return Err(Error::InvalidRecord(format!(
                    "message ({}, {}) on day {} outside [{FIRST_DAY}, -1]",
                    e.a, e.b, m.day
                )));
            }
            if m.count == 0 {
                report.zero_messages += 1;
                continue;
            }
            let mut dependent = false;
            let a_ok = check_user(e.a, "messages", &mut dangling, &mut dependent);
            let b_ok = check_user(e.b, "messages", &mut dangling, &mut dependent);
            if !(a_ok && b_ok) {
                if dependent {
                    report.dropped_dependent += 1;
                }
                continue;
            }
            if !friend_set.contains(&e) {
                dangling.push(|| format!("messages: pair ({}, {}) are not friends", e.a, e.b));
                continue;
            }
            *merged.entry((e.a, e.b, m.day)).or_insert(0) += m.count;
        }
        let messages: Vec<MessageRecord> =
            merged.into_iter().map(|((a, b, day), count)| MessageRecord { a, b, day, count }).collect();

        if dangling.count > 0 {
            return Err(Error::DanglingKeys { count: dangling.count, offenders: dangling.offenders });
        }

        let n = users.len();
        let mut daily_views = vec![Vec::new(); n * HORIZON];
        for ev in &views {
            let u = user_pos[&ev.user] as usize;
            daily_views[u * HORIZON + (ev.day - FIRST_DAY) as usize].push(video_pos[&ev.video]);
        }
        for d in &mut daily_views {
            d.sort_unstable();
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &friends {
            let (a, b) = (user_pos[&e.a], user_pos[&e.b]);
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        let mut user_groups = vec![Vec::new(); n];
        for m in &memberships {
            user_groups[user_pos[&m.user] as usize].push(m.group);
        }
        let mut pair_messages: BTreeMap<(u32, u32), Vec<(i32, u32)>> = BTreeMap::new();
        for m in &messages {
            let key = (user_pos[&m.a], user_pos[&m.b]);
            pair_messages.entry(key).or_default().push((m.day, m.count));
        }

        let corpus = Corpus {
            users,
            videos,
            tags,
            views,
            friends,
            memberships,
            messages,
            user_pos,
            video_pos,
            tag_pos,
            video_tags,
            daily_views,
            adjacency,
            user_groups,
            pair_messages,
        };
        Ok((corpus, report))
    }

    /// Canonical raw rows; `Corpus::build(c.to_parts(), filter)` reproduces `c`.
    pub fn to_parts(&self) -> CorpusParts {
        CorpusParts {
            users: self.users.clone(),
            videos: self.videos.clone(),
            views: self.views.clone(),
            friends: self.friends.clone(),
            memberships: self.memberships.clone(),
            messages: self.messages.clone(),
        }
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn videos(&self) -> &[VideoRecord] {
        &self.videos
    }

    /// Tag vocabulary: every tag carried by at least one video.
    pub fn tags(&self) -> &[TagId] {
        &self.tags
    }

    pub fn views(&self) -> &[ViewEvent] {
        &self.views
    }

    pub fn friends(&self) -> &[FriendEdge] {
        &self.friends
    }

    pub fn memberships(&self) -> &[GroupMembership] {
        &self.memberships
    }

    pub fn messages(&self) -> &[MessageRecord] {
        &self.messages
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_videos(&self) -> usize {
        self.videos.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    /// Dense position of a user, `0..n_users()`, in ascending id order.
    pub fn user_index(&self, id: UserId) -> Option<usize> {
        self.user_pos.get(&id).map(|&i| i as usize)
    }

    pub fn require_user(&self, id: UserId) -> Result<usize> {
        self.user_index(id).ok_or(Error::UnknownUser(id.0))
    }

    pub fn user_at(&self, index: usize) -> &UserRecord {
        &self.users[index]
    }

    pub fn user(&self, id: UserId) -> Option<&UserRecord> {
        self.user_index(id).map(|i| &self.users[i])
    }

    pub fn video_index(&self, id: VideoId) -> Option<usize> {
        self.video_pos.get(&id).map(|&i| i as usize)
    }

    pub fn video_at(&self, index: usize) -> &VideoRecord {
        &self.videos[index]
    }

    pub fn tag_index(&self, id: TagId) -> Option<usize> {
        self.tag_pos.get(&id).map(|&i| i as usize)
    }

    pub fn tag_at(&self, index: usize) -> TagId {
        self.tags[index]
    }

    /// Dense tag indexes of a video, ascending.
    pub fn video_tag_indices(&self, video: usize) -> &[u32] {
        &self.video_tags[video]
    }

    /// Videos (dense indexes, ascending) a user viewed on one day.
    pub fn day_views(&self, user: usize, day: i32) -> &[u32] {
        debug_assert!((FIRST_DAY..=LAST_DAY).contains(&day));
        &self.daily_views[user * HORIZON + (day - FIRST_DAY) as usize]
    }

    /// Set of videos (dense indexes, ascending) viewed inside `window`.
    pub fn window_views(&self, user: usize, window: &DayWindow) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        for d in window.days() {
            out.extend_from_slice(self.day_views(user, d));
        }
        if window.len() > 1 {
            out.sort_unstable();
            out.dedup();
        }
        out
    }

    pub fn viewed_videos(&self, user: UserId, window: &DayWindow) -> Result<Vec<VideoId>> {
        let u = self.require_user(user)?;
        Ok(self.window_views(u, window).into_iter().map(|v| self.videos[v as usize].id).collect())
    }

    pub fn is_active(&self, user: usize, window: &DayWindow) -> bool {
        window.days().any(|d| !self.day_views(user, d).is_empty())
    }

    /// Friends of a user as dense indexes, ascending.
    pub fn friends_of(&self, user: usize) -> &[u32] {
        &self.adjacency[user]
    }

    pub fn are_friends(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&(b as u32)).is_ok()
    }

    /// Groups of a user, ascending.
    pub fn groups_of(&self, user: usize) -> &[GroupId] {
        &self.user_groups[user]
    }

    /// `(day, count)` message rows of a pair, ascending by day.
    pub fn messages_between(&self, a: usize, b: usize) -> &[(i32, u32)] {
        let key = if a < b { (a as u32, b as u32) } else { (b as u32, a as u32) };
        self.pair_messages.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Dense indexes of users with at least one view inside `window`.
    pub fn active_indices(&self, window: &DayWindow) -> Vec<usize> {
        (0..self.n_users()).filter(|&u| self.is_active(u, window)).collect()
    }
}

/// Users with at least one view event inside `window`.
pub fn active_users(c: &Corpus, window: &DayWindow) -> BTreeSet<UserId> {
    c.active_indices(window).into_iter().map(|u| c.users[u].id).collect()
}

/// Fractions of day-0 active users that were also active in the past day,
/// past week and past month.
pub fn coverage_ratios(c: &Corpus) -> Result<[f64; 3]> {
    let today = c.active_indices(&DayWindow::TODAY);
    if today.is_empty() {
        return Err(Error::InsufficientData("no users active on day 0".to_string()));
    }
    let mut out = [0.0; 3];
    for (slot, w) in [DayWindow::PAST_DAY, DayWindow::PAST_WEEK, DayWindow::PAST_MONTH].iter().enumerate() {
        let hit = today.iter().filter(|&&u| c.is_active(u, w)).count();
        out[slot] = hit as f64 / today.len() as f64;
    }
    Ok(out)
}
