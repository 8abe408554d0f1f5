use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compat::{ApiSurface, ConstructId, ConstructKind, Fingerprint, Owner, UsageModel};
use crate::graph::RootManifest;
use crate::registry::{DependencyDecl, PackageId, RegistryIndex, Release, Scope};
use crate::versioning::Version;

use super::HarnessError;

/// Shape of a synthetic ecosystem. Generation is a pure function of these
/// values, seed included.
#[derive(Debug, Clone, PartialEq)]
pub struct EcosystemParams {
    pub seed: u64,
    pub package_count: usize,
    pub max_versions: usize,
    pub max_deps_per_release: usize,
    /// Chance that a construct changes or disappears in each new release.
    pub breaking_probability: f64,
    /// Chance that a library construct is referenced by the project or by
    /// another library.
    pub usage_density: f64,
}

impl Default for EcosystemParams {
    fn default() -> Self {
        EcosystemParams {
            seed: 0,
            package_count: 8,
            max_versions: 5,
            max_deps_per_release: 3,
            breaking_probability: 0.2,
            usage_density: 0.4,
        }
    }
}

impl EcosystemParams {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidParams(m.to_string()));
        if self.package_count == 0 {
            return bad("package_count must be at least 1");
        }
        if self.max_versions == 0 {
            return bad("max_versions must be at least 1");
        }
        for (name, p) in [
            ("breaking_probability", self.breaking_probability),
            ("usage_density", self.usage_density),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(HarnessError::InvalidParams(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// A registry, a project manifest against it, and the project's usage model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ecosystem {
    pub registry: RegistryIndex,
    pub manifest: RootManifest,
    pub usage: UsageModel,
}

pub const REGISTRY_FILE: &str = "registry.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const USAGE_FILE: &str = "usage.json";

impl Ecosystem {
    /// Writes `registry.json`, `manifest.json` and `usage.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(REGISTRY_FILE), self.registry.to_json() + "\n")?;
        std::fs::write(dir.join(MANIFEST_FILE), self.manifest.to_json() + "\n")?;
        std::fs::write(dir.join(USAGE_FILE), self.usage.to_json() + "\n")?;
        Ok(())
    }
}

struct Package {
    id: PackageId,
    prefix: String,
    versions: Vec<Version>,
}

fn version_sequence(rng: &mut ChaCha8Rng, count: usize) -> Vec<Version> {
    let (mut major, mut minor) = (1u32, 0u32);
    let mut texts = vec!["1.0".to_string()];
    let mut last_was_pre = false;
    while texts.len() < count {
        let roll: f64 = rng.gen();
        if roll < 0.15 && !last_was_pre {
            texts.push(format!("{major}.{}-beta", minor + 1));
            last_was_pre = true;
            continue;
        }
        if roll < 0.45 {
            major += 1;
            minor = 0;
        } else {
            minor += 1;
        }
        texts.push(format!("{major}.{minor}"));
        last_was_pre = false;
    }
    texts.iter().map(|t| t.parse().expect("generated version")).collect()
}

fn construct_for(prefix: &str, m: usize) -> ConstructId {
    let (kind, signature) = match m % 3 {
        0 => (ConstructKind::Method, format!("{prefix}.Type{m}#op()")),
        1 => (ConstructKind::Class, format!("{prefix}.Type{m}")),
        _ => (ConstructKind::Field, format!("{prefix}.Type{m}#value")),
    };
    ConstructId { kind, signature }
}

fn pick_scope(rng: &mut ChaCha8Rng) -> Scope {
    match rng.gen_range(0..20) {
        0 => Scope::Test,
        1 => Scope::Provided,
        2 => Scope::Runtime,
        _ => Scope::Compile,
    }
}

/// Builds a closed-world ecosystem whose declared dependencies only point
/// from earlier to later packages, so the declaration graph is acyclic.
pub fn gen_ecosystem(params: &EcosystemParams) -> Result<Ecosystem, HarnessError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.package_count;
    let width = (n.saturating_sub(1)).to_string().len().max(2);

    let packages: Vec<Package> = (0..n)
        .map(|i| {
            let count = rng.gen_range(1..=params.max_versions);
            Package {
                id: PackageId::new("org.gen", format!("p{i:0width$}")).expect("generated id"),
                prefix: format!("org.gen.p{i:0width$}"),
                versions: version_sequence(&mut rng, count),
            }
        })
        .collect();

    let base = Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap();
    let mut releases = Vec::new();
    let mut all_constructs: Vec<(ConstructId, usize)> = Vec::new();

    for (i, pkg) in packages.iter().enumerate() {
        let later: Vec<usize> = (i + 1..n).collect();
        let cap = params.max_deps_per_release.min(later.len());
        let initial = rng.gen_range(0..=cap);
        let mut deps: Vec<usize> = later.choose_multiple(&mut rng, initial).copied().collect();

        let mut next_construct = rng.gen_range(1..=3);
        let mut surface: ApiSurface = ApiSurface::new();
        for m in 0..next_construct {
            surface.entries.insert(construct_for(&pkg.prefix, m), Fingerprint(rng.gen()));
        }
        let mut known: BTreeSet<ConstructId> = surface.entries.keys().cloned().collect();

        let mut day = rng.gen_range(0..120);
        for (j, version) in pkg.versions.iter().enumerate() {
            if j > 0 {
                day += rng.gen_range(1..=60);
                if deps.len() < cap && rng.gen_bool(0.25) {
                    let free: Vec<usize> = later.iter().copied().filter(|x| !deps.contains(x)).collect();
                    if let Some(&x) = free.choose(&mut rng) {
                        deps.push(x);
                    }
                }
                if !deps.is_empty() && rng.gen_bool(0.2) {
                    let k = rng.gen_range(0..deps.len());
                    deps.remove(k);
                }

                let mut next = ApiSurface::new();
                for (id, fp) in &surface.entries {
                    if rng.gen_bool(params.breaking_probability) {
                        if rng.gen_bool(1.0 / 3.0) {
                            continue;
                        }
                        next.entries.insert(id.clone(), Fingerprint(fp.0 ^ rng.gen_range(1..=u32::MAX)));
                    } else {
                        next.entries.insert(id.clone(), *fp);
                    }
                }
                if rng.gen_bool(0.3) {
                    let id = construct_for(&pkg.prefix, next_construct);
                    next_construct += 1;
                    next.entries.insert(id.clone(), Fingerprint(rng.gen()));
                    known.insert(id);
                }
                surface = next;
            }

            let dependencies = deps
                .iter()
                .map(|&x| {
                    let target = &packages[x];
                    let v = target.versions.choose(&mut rng).expect("non-empty").clone();
                    DependencyDecl::new(target.id.clone(), v, pick_scope(&mut rng))
                })
                .collect();
            releases.push(Release {
                package: pkg.id.clone(),
                version: version.clone(),
                released_at: base + Duration::days(day),
                dependencies,
                api: surface.clone(),
            });
        }
        all_constructs.extend(known.into_iter().map(|c| (c, i)));
    }

    let registry = RegistryIndex::from_releases(releases)?;

    let direct_count = rng.gen_range(1..=n.min(3));
    let mut direct: Vec<usize> = (0..n).collect::<Vec<_>>().choose_multiple(&mut rng, direct_count).copied().collect();
    direct.sort_unstable();
    let direct_dependencies = direct
        .iter()
        .map(|&i| {
            let versions = &packages[i].versions;
            let older = versions.len().div_ceil(2);
            let v = versions[rng.gen_range(0..older)].clone();
            let scope = if rng.gen_bool(0.1) { Scope::Test } else { Scope::Compile };
            DependencyDecl::new(packages[i].id.clone(), v, scope)
        })
        .collect();
    let manifest = RootManifest::new("org.gen:app", direct_dependencies)?;

    let main = ConstructId::method("org.gen.app.Main#main()");
    let worker = ConstructId::method("org.gen.app.Worker#run()");
    let unused = ConstructId::method("org.gen.app.Unused#never()");
    let mut owners: Vec<(ConstructId, Owner)> = vec![
        (main.clone(), Owner::Project),
        (worker.clone(), Owner::Project),
        (unused.clone(), Owner::Project),
    ];
    let mut edges = vec![(main.clone(), worker.clone())];
    for (c, i) in &all_constructs {
        owners.push((c.clone(), Owner::Package(packages[*i].id.clone())));
        if rng.gen_bool(params.usage_density) {
            let from = if rng.gen_bool(0.5) { &main } else { &worker };
            edges.push((from.clone(), c.clone()));
        }
        if rng.gen_bool(0.2) {
            edges.push((unused.clone(), c.clone()));
        }
        let deeper: Vec<&ConstructId> = all_constructs
            .iter()
            .filter(|(_, j)| j > i)
            .map(|(d, _)| d)
            .collect();
        if !deeper.is_empty() && rng.gen_bool(params.usage_density / 2.0) {
            let to = deeper[rng.gen_range(0..deeper.len())];
            edges.push((c.clone(), to.clone()));
        }
    }
    let usage = UsageModel::new([main, worker], edges, owners)?;

    Ok(Ecosystem {
        registry,
        manifest,
        usage,
    })
}
