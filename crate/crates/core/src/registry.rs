//! Offline registry snapshot: every package, every release, its declared
//! dependencies and exported API.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::compat::{ApiSurface, CompatError, ConstructId, ConstructKind, Fingerprint};
use crate::versioning::{self, is_stable, LagMeasure, Version, VersionError};

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed registry {path}: {source}")]
    Malformed {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid package id {0:?}: expected group:artifact")]
    InvalidPackageId(String),
    #[error("invalid version at {at}: {source}")]
    InvalidVersion { at: String, source: VersionError },
    #[error("invalid timestamp {value:?} at {at}: expected YYYY-MM-DDThh:mm:ssZ")]
    InvalidTimestamp { at: String, value: String },
    #[error("invalid api entry at {at}: {source}")]
    InvalidApi { at: String, source: CompatError },
    #[error("{from} depends on {target}, which is not in the registry")]
    DanglingTarget { from: String, target: String },
    #[error("duplicate release {0}")]
    DuplicateRelease(String),
    #[error("{0} depends on itself")]
    SelfDependency(String),
    #[error("unknown package {0}")]
    UnknownPackage(PackageId),
    #[error("unknown release {0}")]
    UnknownRelease(String),
    #[error("package {0} has no stable release")]
    NoStableRelease(PackageId),
}

/// Maven `group:artifact` coordinate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PackageId {
    pub group: String,
    pub artifact: String,
}

impl PackageId {
    pub fn new(group: impl Into<String>, artifact: impl Into<String>) -> Result<Self, RegistryError> {
        let (group, artifact) = (group.into(), artifact.into());
        if group.is_empty() || artifact.is_empty() || group.contains(':') || artifact.contains(':') {
            return Err(RegistryError::InvalidPackageId(format!("{group}:{artifact}")));
        }
        Ok(PackageId { group, artifact })
    }

    /// `group:artifact:version`, used in diagnostics.
    pub fn at(&self, version: &Version) -> String {
        format!("{self}:{version}")
    }
}

impl fmt::Display for PackageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.group, self.artifact)
    }
}

impl FromStr for PackageId {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (g, a) = s
            .split_once(':')
            .ok_or_else(|| RegistryError::InvalidPackageId(s.to_string()))?;
        PackageId::new(g, a)
    }
}

impl Serialize for PackageId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PackageId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Compile,
    Runtime,
    Test,
    Provided,
}

impl Scope {
    /// Compile and runtime dependencies take part in the upgrade graph.
    pub fn is_valid(self) -> bool {
        matches!(self, Scope::Compile | Scope::Runtime)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Compile => "compile",
            Scope::Runtime => "runtime",
            Scope::Test => "test",
            Scope::Provided => "provided",
        }
    }
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compile" => Ok(Scope::Compile),
            "runtime" => Ok(Scope::Runtime),
            "test" => Ok(Scope::Test),
            "provided" => Ok(Scope::Provided),
            other => Err(format!("unknown scope {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyDecl {
    pub package: PackageId,
    pub version: Version,
    pub scope: Scope,
}

impl DependencyDecl {
    pub fn new(package: PackageId, version: Version, scope: Scope) -> Self {
        DependencyDecl {
            package,
            version,
            scope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub package: PackageId,
    pub version: Version,
    pub released_at: DateTime<Utc>,
    pub dependencies: Vec<DependencyDecl>,
    pub api: ApiSurface,
}

impl Release {
    pub fn coordinate(&self) -> String {
        self.package.at(&self.version)
    }
}

/// Closed-world index of releases, grouped by package and sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegistryIndex {
    packages: BTreeMap<PackageId, Vec<Release>>,
}

// On-disk layout.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDoc {
    packages: Vec<PackageDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PackageDoc {
    group: String,
    artifact: String,
    releases: Vec<ReleaseDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReleaseDoc {
    version: String,
    released_at: String,
    #[serde(default)]
    dependencies: Vec<DeclDoc>,
    #[serde(default)]
    api: Vec<ApiDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeclDoc {
    package: String,
    version: String,
    scope: Scope,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApiDoc {
    id: String,
    kind: ConstructKind,
    fingerprint: String,
}

pub fn parse_timestamp(value: &str, at: &str) -> Result<DateTime<Utc>, RegistryError> {
    let bad = || RegistryError::InvalidTimestamp {
        at: at.to_string(),
        value: value.to_string(),
    };
    if !value.ends_with('Z') {
        return Err(bad());
    }
    DateTime::parse_from_rfc3339(value)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| bad())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

impl RegistryIndex {
    /// Validates and indexes a set of releases in any order.
    pub fn from_releases(releases: impl IntoIterator<Item = Release>) -> Result<Self, RegistryError> {
        let mut packages: BTreeMap<PackageId, Vec<Release>> = BTreeMap::new();
        for r in releases {
            packages.entry(r.package.clone()).or_default().push(r);
        }
        for list in packages.values_mut() {
            list.sort_by(|a, b| a.version.cmp(&b.version));
            for pair in list.windows(2) {
                if pair[0].version == pair[1].version {
                    return Err(RegistryError::DuplicateRelease(pair[1].coordinate()));
                }
            }
        }
        let index = RegistryIndex { packages };
        for list in index.packages.values() {
            for r in list {
                for d in &r.dependencies {
                    if d.package == r.package {
                        return Err(RegistryError::SelfDependency(r.coordinate()));
                    }
                    if index.release(&d.package, &d.version).is_err() {
                        return Err(RegistryError::DanglingTarget {
                            from: r.coordinate(),
                            target: d.package.at(&d.version),
                        });
                    }
                }
            }
        }
        Ok(index)
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        Self::from_json_named(text, "<memory>")
    }

    fn from_json_named(text: &str, path: &str) -> Result<Self, RegistryError> {
        let doc: RegistryDoc = serde_json::from_str(text).map_err(|source| RegistryError::Malformed {
            path: path.to_string(),
            source,
        })?;
        let mut releases = Vec::new();
        for p in doc.packages {
            let package = PackageId::new(p.group, p.artifact)?;
            for r in p.releases {
                let at = format!("{package}:{}", r.version);
                let version = r
                    .version
                    .parse::<Version>()
                    .map_err(|source| RegistryError::InvalidVersion { at: at.clone(), source })?;
                let released_at = parse_timestamp(&r.released_at, &at)?;
                let mut dependencies = Vec::with_capacity(r.dependencies.len());
                for d in r.dependencies {
                    let target: PackageId = d.package.parse()?;
                    let version = d.version.parse::<Version>().map_err(|source| {
                        RegistryError::InvalidVersion {
                            at: format!("{at} -> {target}"),
                            source,
                        }
                    })?;
                    dependencies.push(DependencyDecl::new(target, version, d.scope));
                }
                let mut api = ApiSurface::new();
                for entry in r.api {
                    let invalid = |source| RegistryError::InvalidApi {
                        at: at.clone(),
                        source,
                    };
                    let id = ConstructId::new(entry.kind, entry.id).map_err(invalid)?;
                    let fp: Fingerprint = entry.fingerprint.parse().map_err(invalid)?;
                    api.entries.insert(id, fp);
                }
                releases.push(Release {
                    package: package.clone(),
                    version,
                    released_at,
                    dependencies,
                    api,
                });
            }
        }
        Self::from_releases(releases)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        load_registry(path)
    }

    /// Canonical JSON rendering: packages and releases in ascending order.
    pub fn to_json(&self) -> String {
        let doc = RegistryDoc {
            packages: self
                .packages
                .iter()
                .map(|(id, releases)| PackageDoc {
                    group: id.group.clone(),
                    artifact: id.artifact.clone(),
                    releases: releases
                        .iter()
                        .map(|r| ReleaseDoc {
                            version: r.version.to_string(),
                            released_at: format_timestamp(&r.released_at),
                            dependencies: r
                                .dependencies
                                .iter()
                                .map(|d| DeclDoc {
                                    package: d.package.to_string(),
                                    version: d.version.to_string(),
                                    scope: d.scope,
                                })
                                .collect(),
                            api: r
                                .api
                                .entries
                                .iter()
                                .map(|(id, fp)| ApiDoc {
                                    id: id.signature.clone(),
                                    kind: id.kind,
                                    fingerprint: fp.to_string(),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("registry serializes")
    }

    pub fn package_ids(&self) -> impl Iterator<Item = &PackageId> {
        self.packages.keys()
    }

    pub fn package_count(&self) -> usize {
        self.packages.len()
    }

    pub fn releases(&self) -> impl Iterator<Item = &Release> {
        self.packages.values().flatten()
    }

    pub fn releases_of(&self, package: &PackageId) -> Result<&[Release], RegistryError> {
        self.packages
            .get(package)
            .map(Vec::as_slice)
            .ok_or_else(|| RegistryError::UnknownPackage(package.clone()))
    }

    pub fn release(&self, package: &PackageId, version: &Version) -> Result<&Release, RegistryError> {
        let list = self
            .packages
            .get(package)
            .ok_or_else(|| RegistryError::UnknownRelease(package.at(version)))?;
        list.binary_search_by(|r| r.version.cmp(version))
            .map(|i| &list[i])
            .map_err(|_| RegistryError::UnknownRelease(package.at(version)))
    }

    pub fn latest_stable(&self, package: &PackageId) -> Result<&Release, RegistryError> {
        self.releases_of(package)?
            .iter()
            .rev()
            .find(|r| is_stable(&r.version))
            .ok_or_else(|| RegistryError::NoStableRelease(package.clone()))
    }

    /// Mediated transitive closure of `(package, version)` resolved on its
    /// own: nearest declaration wins, first declared breaks ties, and test
    /// or provided declarations are ignored at every level. The package
    /// itself is not part of the result.
    pub fn isolated_closure(
        &self,
        package: &PackageId,
        version: &Version,
    ) -> Result<BTreeMap<PackageId, Version>, RegistryError> {
        let start = self.release(package, version)?;
        let mut resolved: BTreeMap<PackageId, Version> = BTreeMap::new();
        let mut seen: BTreeSet<&PackageId> = BTreeSet::from([package]);
        let mut queue: VecDeque<&Release> = VecDeque::from([start]);
        while let Some(r) = queue.pop_front() {
            for d in r.dependencies.iter().filter(|d| d.scope.is_valid()) {
                if seen.insert(&d.package) {
                    resolved.insert(d.package.clone(), d.version.clone());
                    queue.push_back(self.release(&d.package, &d.version)?);
                }
            }
        }
        Ok(resolved)
    }

    /// Technical lag of `(package, version)`. Time lag counts the days to
    /// the latest stable release and is zero whenever the version lag is.
    pub fn lag(&self, package: &PackageId, version: &Version) -> Result<LagMeasure, RegistryError> {
        let current = self.release(package, version)?;
        let releases = self.releases_of(package)?;
        let version_lag = versioning::version_lag(version, releases.iter().map(|r| &r.version))
            .map_err(|_| RegistryError::UnknownRelease(package.at(version)))?;
        let time_lag = if version_lag == 0 {
            0
        } else {
            let latest = self.latest_stable(package)?;
            versioning::time_lag(current.released_at, latest.released_at)
        };
        Ok(LagMeasure {
            version_lag,
            time_lag,
        })
    }

    pub fn closure_size(&self, package: &PackageId, version: &Version) -> Result<usize, RegistryError> {
        Ok(self.isolated_closure(package, version)?.len())
    }
}

pub fn load_registry(path: &Path) -> Result<RegistryIndex, RegistryError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: name.clone(),
        source,
    })?;
    RegistryIndex::from_json_named(&text, &name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_packages() -> &'static str {
        r#"{"packages": [
          {"group": "g", "artifact": "a", "releases": [
            {"version": "1.0", "released_at": "2020-01-01T00:00:00Z",
             "dependencies": [{"package": "g:b", "version": "1.0", "scope": "compile"}],
             "api": [{"id": "a.A#run()", "kind": "method", "fingerprint": "a1b2c3d4"}]},
            {"version": "2.0", "released_at": "2021-01-01T00:00:00Z"},
            {"version": "1.1", "released_at": "2020-06-01T00:00:00Z",
             "dependencies": [{"package": "g:c", "version": "1.0", "scope": "test"}]}
          ]},
          {"group": "g", "artifact": "b", "releases": [
            {"version": "1.0", "released_at": "2020-01-01T00:00:00Z",
             "dependencies": [{"package": "g:c", "version": "1.0", "scope": "runtime"}]}
          ]},
          {"group": "g", "artifact": "c", "releases": [
            {"version": "1.0", "released_at": "2020-01-01T00:00:00Z"},
            {"version": "2.0-rc1", "released_at": "2020-02-01T00:00:00Z"}
          ]}
        ]}"#
    }

    fn id(s: &str) -> PackageId {
        s.parse().unwrap()
    }

    fn v(s: &str) -> Version {
        s.parse().unwrap()
    }

    #[test]
    fn loads_well_formed_fixture() {
        let reg = RegistryIndex::from_json(three_packages()).unwrap();
        assert_eq!(reg.package_count(), 3);
        let versions: Vec<String> = reg
            .releases_of(&id("g:a"))
            .unwrap()
            .iter()
            .map(|r| r.version.to_string())
            .collect();
        assert_eq!(versions, ["1.0", "1.1", "2.0"]);
        let a10 = reg.release(&id("g:a"), &v("1.0")).unwrap();
        assert_eq!(a10.api.len(), 1);
    }

    #[test]
    fn canonical_json_round_trips() {
        let reg = RegistryIndex::from_json(three_packages()).unwrap();
        let again = RegistryIndex::from_json(&reg.to_json()).unwrap();
        assert_eq!(reg, again);
        assert_eq!(reg.to_json(), again.to_json());
    }

    #[test]
    fn dangling_target_names_coordinate() {
        let doc = r#"{"packages": [{"group": "g", "artifact": "a", "releases": [
            {"version": "1.0", "released_at": "2020-01-01T00:00:00Z",
             "dependencies": [{"package": "g:b", "version": "9.9", "scope": "compile"}]}]}]}"#;
        let err = RegistryIndex::from_json(doc).unwrap_err();
        match err {
            RegistryError::DanglingTarget { ref target, .. } => assert_eq!(target, "g:b:9.9"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_releases_rejected() {
        let twice = r#"{"packages": [{"group": "g", "artifact": "a", "releases": [
            {"version": "1.0", "released_at": "2020-01-01T00:00:00Z"},
            {"version": "1.0", "released_at": "2020-01-02T00:00:00Z"}]}]}"#;
        assert!(matches!(
            RegistryIndex::from_json(twice),
            Err(RegistryError::DuplicateRelease(_))
        ));
        let trimmed = r#"{"packages": [{"group": "g", "artifact": "a", "releases": [
            {"version": "1.0", "released_at": "2020-01-01T00:00:00Z"},
            {"version": "1.0.0", "released_at": "2020-01-02T00:00:00Z"}]}]}"#;
        assert!(matches!(
            RegistryIndex::from_json(trimmed),
            Err(RegistryError::DuplicateRelease(_))
        ));
    }

    #[test]
    fn rejects_unknown_keys_and_non_utc() {
        let extra = r#"{"packages": [], "mirror": "x"}"#;
        assert!(matches!(
            RegistryIndex::from_json(extra),
            Err(RegistryError::Malformed { .. })
        ));
        let offset = r#"{"packages": [{"group": "g", "artifact": "a", "releases": [
            {"version": "1.0", "released_at": "2020-01-01T00:00:00+01:00"}]}]}"#;
        assert!(matches!(
            RegistryIndex::from_json(offset),
            Err(RegistryError::InvalidTimestamp { .. })
        ));
    }

    #[test]
    fn rejects_self_dependency() {
        let doc = r#"{"packages": [{"group": "g", "artifact": "a", "releases": [
            {"version": "1.0", "released_at": "2020-01-01T00:00:00Z",
             "dependencies": [{"package": "g:a", "version": "1.0", "scope": "compile"}]}]}]}"#;
        assert!(matches!(
            RegistryIndex::from_json(doc),
            Err(RegistryError::SelfDependency(_))
        ));
    }

    #[test]
    fn lookups() {
        let reg = RegistryIndex::from_json(three_packages()).unwrap();
        assert!(matches!(
            reg.releases_of(&id("g:z")),
            Err(RegistryError::UnknownPackage(_))
        ));
        assert_eq!(reg.latest_stable(&id("g:c")).unwrap().version, v("1.0"));
        assert_eq!(reg.latest_stable(&id("g:a")).unwrap().version, v("2.0"));
    }

    #[test]
    fn no_stable_release() {
        let doc = r#"{"packages": [{"group": "g", "artifact": "a", "releases": [
            {"version": "2.0-beta", "released_at": "2020-01-01T00:00:00Z"}]}]}"#;
        let reg = RegistryIndex::from_json(doc).unwrap();
        assert!(matches!(
            reg.latest_stable(&id("g:a")),
            Err(RegistryError::NoStableRelease(_))
        ));
    }

    #[test]
    fn lag_per_release() {
        let reg = RegistryIndex::from_json(three_packages()).unwrap();
        let lag = reg.lag(&id("g:a"), &v("1.0")).unwrap();
        assert_eq!(lag.version_lag, 2);
        assert_eq!(lag.time_lag, 366);
        assert_eq!(reg.lag(&id("g:a"), &v("2.0")).unwrap(), LagMeasure::default());
        // a pre-release newer than every stable release has no lag
        assert_eq!(reg.lag(&id("g:c"), &v("2.0-rc1")).unwrap(), LagMeasure::default());
    }

    #[test]
    fn closure_sizes() {
        let reg = RegistryIndex::from_json(three_packages()).unwrap();
        // a:1.0 -> b:1.0 -> c:1.0 (runtime counts)
        assert_eq!(reg.closure_size(&id("g:a"), &v("1.0")).unwrap(), 2);
        // a:1.1 -> c:1.0 (test) only
        assert_eq!(reg.closure_size(&id("g:a"), &v("1.1")).unwrap(), 0);
        assert_eq!(reg.closure_size(&id("g:c"), &v("1.0")).unwrap(), 0);
        assert!(matches!(
            reg.closure_size(&id("g:a"), &v("3.0")),
            Err(RegistryError::UnknownRelease(_))
        ));
    }
}
