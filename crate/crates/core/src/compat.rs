//! Breaking-change detection between API surfaces and construct-level
//! reachability over a project's usage model.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::registry::{PackageId, Release};

#[derive(Debug, thiserror::Error)]
pub enum CompatError {
    #[error("invalid construct id {0:?}: expected kind:signature with kind class, method or field")]
    InvalidConstruct(String),
    #[error("invalid fingerprint {0:?}: expected 8 lower-case hex characters")]
    InvalidFingerprint(String),
    #[error("invalid owner {0:?}: expected group:artifact or <project>")]
    InvalidOwner(String),
    #[error("construct {0} appears in an edge but has no owner")]
    MissingOwner(ConstructId),
    #[error("entry construct {0} is not owned by the project")]
    EntryNotProjectOwned(ConstructId),
    #[error("cannot compare releases of different packages: {old} vs {candidate}")]
    PackageMismatch { old: PackageId, candidate: PackageId },
    #[error("cannot read usage model {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed usage model {path}: {source}")]
    Malformed {
        path: String,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstructKind {
    Class,
    Method,
    Field,
}

impl ConstructKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstructKind::Class => "class",
            ConstructKind::Method => "method",
            ConstructKind::Field => "field",
        }
    }
}

/// A class, method or field, identified by kind and signature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstructId {
    pub kind: ConstructKind,
    pub signature: String,
}

impl ConstructId {
    pub fn new(kind: ConstructKind, signature: impl Into<String>) -> Result<Self, CompatError> {
        let signature = signature.into();
        if signature.is_empty() {
            return Err(CompatError::InvalidConstruct(format!("{}:", kind.as_str())));
        }
        Ok(ConstructId { kind, signature })
    }

    pub fn class(signature: &str) -> Self {
        Self::new(ConstructKind::Class, signature).expect("non-empty signature")
    }

    pub fn method(signature: &str) -> Self {
        Self::new(ConstructKind::Method, signature).expect("non-empty signature")
    }

    pub fn field(signature: &str) -> Self {
        Self::new(ConstructKind::Field, signature).expect("non-empty signature")
    }
}

impl fmt::Display for ConstructId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.signature)
    }
}

impl FromStr for ConstructId {
    type Err = CompatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CompatError::InvalidConstruct(s.to_string());
        let (kind, signature) = s.split_once(':').ok_or_else(bad)?;
        let kind = match kind {
            "class" => ConstructKind::Class,
            "method" => ConstructKind::Method,
            "field" => ConstructKind::Field,
            _ => return Err(bad()),
        };
        if signature.is_empty() {
            return Err(bad());
        }
        Ok(ConstructId {
            kind,
            signature: signature.to_string(),
        })
    }
}

impl Serialize for ConstructId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConstructId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Opaque 32-bit digest of a construct's shape, written as 8 lower-case hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(pub u32);

impl FromStr for Fingerprint {
    type Err = CompatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ok = s.len() == 8 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if !ok {
            return Err(CompatError::InvalidFingerprint(s.to_string()));
        }
        u32::from_str_radix(s, 16)
            .map(Fingerprint)
            .map_err(|_| CompatError::InvalidFingerprint(s.to_string()))
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08x}", self.0)
    }
}

/// Exported constructs of one release.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApiSurface {
    pub entries: BTreeMap<ConstructId, Fingerprint>,
}

impl ApiSurface {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, id: ConstructId, fingerprint: u32) -> Self {
        self.entries.insert(id, Fingerprint(fingerprint));
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BreakingSet {
    pub removed: BTreeSet<ConstructId>,
    pub changed: BTreeSet<ConstructId>,
}

impl BreakingSet {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.changed.is_empty()
    }

    /// `removed ∪ changed`.
    pub fn all(&self) -> BTreeSet<ConstructId> {
        self.removed.union(&self.changed).cloned().collect()
    }
}

/// Removed or re-fingerprinted constructs going from `old` to `new`.
/// Additions never break.
pub fn breaking_changes(old: &ApiSurface, new: &ApiSurface) -> BreakingSet {
    let mut set = BreakingSet::default();
    for (id, fp) in &old.entries {
        match new.entries.get(id) {
            None => {
                set.removed.insert(id.clone());
            }
            Some(other) if other != fp => {
                set.changed.insert(id.clone());
            }
            Some(_) => {}
        }
    }
    set
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Owner {
    Project,
    Package(PackageId),
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::Project => f.write_str(PROJECT_OWNER),
            Owner::Package(p) => p.fmt(f),
        }
    }
}

const PROJECT_OWNER: &str = "<project>";

/// Construct-level reference graph of the project under analysis.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UsageModel {
    entries: BTreeSet<ConstructId>,
    edges: BTreeSet<(ConstructId, ConstructId)>,
    owners: BTreeMap<ConstructId, Owner>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UsageDoc {
    entries: Vec<ConstructId>,
    #[serde(default)]
    edges: Vec<(ConstructId, ConstructId)>,
    #[serde(default)]
    owners: BTreeMap<ConstructId, String>,
}

impl UsageModel {
    pub fn new(
        entries: impl IntoIterator<Item = ConstructId>,
        edges: impl IntoIterator<Item = (ConstructId, ConstructId)>,
        owners: impl IntoIterator<Item = (ConstructId, Owner)>,
    ) -> Result<Self, CompatError> {
        let model = UsageModel {
            entries: entries.into_iter().collect(),
            edges: edges.into_iter().collect(),
            owners: owners.into_iter().collect(),
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), CompatError> {
        for entry in &self.entries {
            match self.owners.get(entry) {
                Some(Owner::Project) => {}
                Some(Owner::Package(_)) => {
                    return Err(CompatError::EntryNotProjectOwned(entry.clone()))
                }
                None => return Err(CompatError::MissingOwner(entry.clone())),
            }
        }
        for (from, to) in &self.edges {
            for c in [from, to] {
                if !self.owners.contains_key(c) {
                    return Err(CompatError::MissingOwner(c.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeSet<ConstructId> {
        &self.entries
    }

    pub fn edges(&self) -> &BTreeSet<(ConstructId, ConstructId)> {
        &self.edges
    }

    pub fn owners(&self) -> &BTreeMap<ConstructId, Owner> {
        &self.owners
    }

    pub fn owner(&self, c: &ConstructId) -> Option<&Owner> {
        self.owners.get(c)
    }

    pub fn from_json(text: &str) -> Result<Self, CompatError> {
        Self::from_json_named(text, "<memory>")
    }

    fn from_json_named(text: &str, path: &str) -> Result<Self, CompatError> {
        let doc: UsageDoc = serde_json::from_str(text).map_err(|source| CompatError::Malformed {
            path: path.to_string(),
            source,
        })?;
        let mut owners = BTreeMap::new();
        for (c, o) in doc.owners {
            let owner = if o == PROJECT_OWNER {
                Owner::Project
            } else {
                Owner::Package(o.parse().map_err(|_| CompatError::InvalidOwner(o.clone()))?)
            };
            owners.insert(c, owner);
        }
        Self::new(doc.entries, doc.edges, owners)
    }

    pub fn load(path: &Path) -> Result<Self, CompatError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| CompatError::Io {
            path: name.clone(),
            source,
        })?;
        Self::from_json_named(&text, &name)
    }

    pub fn to_json(&self) -> String {
        let doc = UsageDoc {
            entries: self.entries.iter().cloned().collect(),
            edges: self.edges.iter().cloned().collect(),
            owners: self
                .owners
                .iter()
                .map(|(c, o)| (c.clone(), o.to_string()))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("usage model serializes")
    }

    /// Every construct reachable from an entry, entries included.
    pub fn reachable(&self) -> BTreeSet<ConstructId> {
        let mut adjacency: BTreeMap<&ConstructId, Vec<&ConstructId>> = BTreeMap::new();
        for (from, to) in &self.edges {
            adjacency.entry(from).or_default().push(to);
        }
        let mut seen: BTreeSet<ConstructId> = self.entries.clone();
        let mut queue: VecDeque<&ConstructId> = self.entries.iter().collect();
        while let Some(c) = queue.pop_front() {
            for &next in adjacency.get(c).map(Vec::as_slice).unwrap_or_default() {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }
}

/// Constructs owned by `package` that the project can reach.
pub fn reachable_used_constructs(usage: &UsageModel, package: &PackageId) -> BTreeSet<ConstructId> {
    usage
        .reachable()
        .into_iter()
        .filter(|c| matches!(usage.owner(c), Some(Owner::Package(p)) if p == package))
        .collect()
}

/// Result of a compatibility check; `evidence` holds the broken constructs
/// the project reaches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compatibility {
    pub evidence: BTreeSet<ConstructId>,
}

impl Compatibility {
    pub fn is_compatible(&self) -> bool {
        self.evidence.is_empty()
    }
}

pub fn is_compatible(
    usage: &UsageModel,
    package: &PackageId,
    old_release: &Release,
    candidate: &Release,
) -> Result<Compatibility, CompatError> {
    if old_release.package != candidate.package {
        return Err(CompatError::PackageMismatch {
            old: old_release.package.clone(),
            candidate: candidate.package.clone(),
        });
    }
    if &old_release.package != package {
        return Err(CompatError::PackageMismatch {
            old: package.clone(),
            candidate: old_release.package.clone(),
        });
    }
    let broken = breaking_changes(&old_release.api, &candidate.api).all();
    if broken.is_empty() {
        return Ok(Compatibility {
            evidence: BTreeSet::new(),
        });
    }
    let used = reachable_used_constructs(usage, package);
    Ok(Compatibility {
        evidence: broken.intersection(&used).cloned().collect(),
    })
}
