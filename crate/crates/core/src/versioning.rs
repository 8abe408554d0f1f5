//! Version parsing, ordering, and technical-lag metrics.
//!
//! Versions follow a Maven-flavoured layout: segments separated by `.` or
//! `-`, with an extra split wherever letters meet digits (`rc1` becomes
//! `rc`, `1`). Comparison trims trailing zero segments, so `1.0` and `1`
//! are the same version. Qualifiers rank as
//!
//! ```text
//! alpha < beta < milestone < rc < snapshot < (release / numbers) < sp < anything else
//! ```
//!
//! A numeric segment occupies the release slot of that table, which keeps
//! the order total when a qualifier is compared against a missing segment.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VersionError {
    #[error("empty version string")]
    Empty,
    #[error("version {0:?} contains whitespace")]
    Whitespace(String),
    #[error("version {0:?} has a numeric segment that does not fit in 64 bits")]
    NumericOverflow(String),
    #[error("version {0} is not among the known releases")]
    UnknownVersion(String),
}

/// One token of a version string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Segment {
    Number(u64),
    /// Lower-cased word.
    Qualifier(String),
}

impl Segment {
    const ZERO: Segment = Segment::Number(0);

    /// Position in the qualifier table. Numbers share the release slot.
    fn class(&self) -> u8 {
        match self {
            Segment::Number(_) => 5,
            Segment::Qualifier(q) => match q.as_str() {
                "alpha" => 0,
                "beta" => 1,
                "milestone" => 2,
                "rc" => 3,
                "snapshot" => 4,
                "sp" => 6,
                _ => 7,
            },
        }
    }

    pub fn is_pre_release(&self) -> bool {
        self.class() < 5
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.class().cmp(&other.class()).then_with(|| match (self, other) {
            (Segment::Number(a), Segment::Number(b)) => a.cmp(b),
            (Segment::Qualifier(a), Segment::Qualifier(b)) => a.cmp(b),
            // Different variants always land in different classes.
            _ => Ordering::Equal,
        })
    }
}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A parsed version. Keeps the original text for rendering; equality,
/// hashing and ordering all use the trimmed segment list.
#[derive(Debug, Clone)]
pub struct Version {
    raw: String,
    segments: Vec<Segment>,
}

impl Version {
    pub fn parse(text: &str) -> Result<Version, VersionError> {
        parse_version(text)
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Segments with trailing zeros removed.
    fn significant(&self) -> &[Segment] {
        let mut end = self.segments.len();
        while end > 0 && self.segments[end - 1] == Segment::ZERO {
            end -= 1;
        }
        &self.segments[..end]
    }

    pub fn is_stable(&self) -> bool {
        is_stable(self)
    }
}

pub fn parse_version(text: &str) -> Result<Version, VersionError> {
    if text.is_empty() {
        return Err(VersionError::Empty);
    }
    if text.chars().any(char::is_whitespace) {
        return Err(VersionError::Whitespace(text.to_string()));
    }

    let mut segments = Vec::new();
    let mut token = String::new();
    let mut token_is_digit = false;

    let mut flush = |token: &mut String, is_digit: bool| -> Result<(), VersionError> {
        if token.is_empty() {
            return Ok(());
        }
        let seg = if is_digit {
            let n = token
                .parse::<u64>()
                .map_err(|_| VersionError::NumericOverflow(text.to_string()))?;
            Segment::Number(n)
        } else {
            Segment::Qualifier(token.to_lowercase())
        };
        segments.push(seg);
        token.clear();
        Ok(())
    };

    for ch in text.chars() {
        if ch == '.' || ch == '-' {
            flush(&mut token, token_is_digit)?;
            continue;
        }
        let is_digit = ch.is_ascii_digit();
        if !token.is_empty() && is_digit != token_is_digit {
            flush(&mut token, token_is_digit)?;
        }
        token_is_digit = is_digit;
        token.push(ch);
    }
    flush(&mut token, token_is_digit)?;

    Ok(Version {
        raw: text.to_string(),
        segments,
    })
}

pub fn compare_versions(a: &Version, b: &Version) -> Ordering {
    let (a, b) = (a.significant(), b.significant());
    let len = a.len().max(b.len());
    for i in 0..len {
        let x = a.get(i).unwrap_or(&Segment::ZERO);
        let y = b.get(i).unwrap_or(&Segment::ZERO);
        match x.cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// False when any segment is alpha, beta, milestone, rc or snapshot.
pub fn is_stable(v: &Version) -> bool {
    !v.segments.iter().any(Segment::is_pre_release)
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_versions(self, other)
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Version {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Version {}

impl Hash for Version {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.significant().hash(state);
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for Version {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_version(&text).map_err(serde::de::Error::custom)
    }
}

/// Technical lag of one artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LagMeasure {
    /// Stable releases strictly newer than the one in use.
    pub version_lag: u64,
    /// Whole days between the release in use and the latest stable release.
    pub time_lag: u64,
}

/// Number of stable releases in `all_releases` strictly newer than `current`.
pub fn version_lag<'a, I>(current: &Version, all_releases: I) -> Result<u64, VersionError>
where
    I: IntoIterator<Item = &'a Version>,
{
    let mut present = false;
    let mut newer = 0;
    for r in all_releases {
        match compare_versions(r, current) {
            Ordering::Equal => present = true,
            Ordering::Greater if is_stable(r) => newer += 1,
            _ => {}
        }
    }
    if !present {
        return Err(VersionError::UnknownVersion(current.to_string()));
    }
    Ok(newer)
}

/// Whole days from `current_released_at` to `latest_released_at`, never negative.
pub fn time_lag(current_released_at: DateTime<Utc>, latest_released_at: DateTime<Utc>) -> u64 {
    let days = (latest_released_at - current_released_at).num_days();
    days.max(0) as u64
}
