//! Terse builders for hand-written fixtures.
//!
//! ```
//! use laglift::harness::fixtures::{rel, RegistryBuilder};
//!
//! let reg = RegistryBuilder::new()
//!     .add(rel("org.a:a", "1.0").dep("org.b:b", "1.0"))
//!     .add(rel("org.a:a", "2.0").day(30))
//!     .add(rel("org.b:b", "1.0").api("method:b.B#run()", 0xa1b2c3d4))
//!     .build()
//!     .unwrap();
//! assert_eq!(reg.package_count(), 2);
//! ```
//!
//! Builders panic on malformed coordinates; they are meant for literals.

use chrono::{DateTime, Duration, TimeZone, Utc};

use crate::compat::{ApiSurface, ConstructId, Fingerprint, Owner, UsageModel};
use crate::graph::RootManifest;
use crate::registry::{DependencyDecl, PackageId, RegistryError, RegistryIndex, Release, Scope};

/// Day zero for fixture timestamps.
pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
}

pub fn pkg(s: &str) -> PackageId {
    s.parse().unwrap_or_else(|e| panic!("bad package id {s:?}: {e}"))
}

pub fn construct(s: &str) -> ConstructId {
    s.parse().unwrap_or_else(|e| panic!("bad construct {s:?}: {e}"))
}

fn decl(p: &str, v: &str, scope: Scope) -> DependencyDecl {
    DependencyDecl::new(pkg(p), v.parse().expect("fixture version"), scope)
}

#[derive(Debug, Clone)]
pub struct ReleaseBuilder {
    release: Release,
}

/// Starts a release of `package` at `version`, released on day zero.
pub fn rel(package: &str, version: &str) -> ReleaseBuilder {
    ReleaseBuilder {
        release: Release {
            package: pkg(package),
            version: version.parse().expect("fixture version"),
            released_at: epoch(),
            dependencies: Vec::new(),
            api: ApiSurface::new(),
        },
    }
}

impl ReleaseBuilder {
    pub fn day(mut self, day: i64) -> Self {
        self.release.released_at = epoch() + Duration::days(day);
        self
    }

    pub fn dep(self, package: &str, version: &str) -> Self {
        self.scoped(package, version, Scope::Compile)
    }

    pub fn scoped(mut self, package: &str, version: &str, scope: Scope) -> Self {
        self.release.dependencies.push(decl(package, version, scope));
        self
    }

    /// Adds an exported construct written as `kind:signature`.
    pub fn api(mut self, id: &str, fingerprint: u32) -> Self {
        self.release.api.entries.insert(construct(id), Fingerprint(fingerprint));
        self
    }

    pub fn build(self) -> Release {
        self.release
    }
}

#[derive(Debug, Clone, Default)]
pub struct RegistryBuilder {
    releases: Vec<Release>,
}

impl RegistryBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(mut self, release: ReleaseBuilder) -> Self {
        self.releases.push(release.build());
        self
    }

    pub fn build(self) -> Result<RegistryIndex, RegistryError> {
        RegistryIndex::from_releases(self.releases)
    }
}

/// Manifest named `com.example:app` with compile-scoped `(package, version)` pairs.
pub fn manifest(deps: &[(&str, &str)]) -> RootManifest {
    RootManifest::new(
        "com.example:app",
        deps.iter().map(|(p, v)| decl(p, v, Scope::Compile)).collect(),
    )
    .expect("fixture manifest")
}

/// Usage model where the project's single entry `method:app.Main#main()`
/// reaches each listed construct through a chain of the given edges.
///
/// `uses` are `(construct, owner)` pairs called directly from the entry;
/// `edges` are extra `(from, to)` references, with owners inferred from
/// `uses` or given in `owners`.
#[derive(Debug, Clone, Default)]
pub struct UsageBuilder {
    entries: Vec<ConstructId>,
    edges: Vec<(ConstructId, ConstructId)>,
    owners: Vec<(ConstructId, Owner)>,
}

pub const MAIN: &str = "method:app.Main#main()";

impl UsageBuilder {
    pub fn new() -> Self {
        UsageBuilder {
            entries: vec![construct(MAIN)],
            edges: Vec::new(),
            owners: vec![(construct(MAIN), Owner::Project)],
        }
    }

    /// The entry calls `id`, owned by `package`.
    pub fn uses(self, id: &str, package: &str) -> Self {
        self.owned(id, package).edge(MAIN, id)
    }

    pub fn owned(mut self, id: &str, package: &str) -> Self {
        self.owners.push((construct(id), Owner::Package(pkg(package))));
        self
    }

    pub fn edge(mut self, from: &str, to: &str) -> Self {
        self.edges.push((construct(from), construct(to)));
        self
    }

    pub fn build(self) -> UsageModel {
        UsageModel::new(self.entries, self.edges, self.owners).expect("fixture usage model")
    }
}
