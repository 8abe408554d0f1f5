//! The upgrade loop: order the nodes, enumerate newer stable versions,
//! drop the ones that grow the dependency closure or break a construct
//! the project reaches, take the newest survivor, re-resolve, repeat.

mod order;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::compat::{is_compatible, CompatError, ConstructId, UsageModel};
use crate::graph::{graph_metrics, resolve_pinned, update_graph, DependencyGraph, GraphError, GraphMetrics};
use crate::registry::{PackageId, RegistryError, RegistryIndex};
use crate::versioning::{is_stable, Version};

pub use order::traversal_order;

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Compat(#[from] CompatError),
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("iteration {iteration} ({package}): {source}")]
    Iteration {
        iteration: usize,
        package: PackageId,
        #[source]
        source: StepError,
    },
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Lagease,
    DirectLatest,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lagease => "lagease",
            Mode::DirectLatest => "direct-latest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Upgraded,
    KeptNoCandidates,
    KeptAllFiltered,
    SkippedNodeVanished,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Upgraded => "upgraded",
            Outcome::KeptNoCandidates => "kept-no-candidates",
            Outcome::KeptAllFiltered => "kept-all-filtered",
            Outcome::SkippedNodeVanished => "skipped-node-vanished",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Debloat,
    Incompatible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rejection {
    pub version: Version,
    pub reason: RejectReason,
    /// Broken constructs the project reaches; empty for debloat.
    pub evidence: Vec<ConstructId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDecision {
    pub package: PackageId,
    #[serde(rename = "from")]
    pub from_version: Version,
    #[serde(rename = "to")]
    pub to_version: Version,
    pub outcome: Outcome,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpgradePlan {
    pub mode: Mode,
    pub metrics_before: GraphMetrics,
    pub metrics_after: GraphMetrics,
    pub decisions: Vec<NodeDecision>,
}

impl UpgradePlan {
    /// JSON with keys sorted at every level.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("plan serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("plan serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn upgrades(&self) -> impl Iterator<Item = &NodeDecision> {
        self.decisions.iter().filter(|d| d.outcome == Outcome::Upgraded)
    }

    /// The graph after applying every upgrade in the plan to `initial`.
    pub fn apply(&self, initial: &DependencyGraph, reg: &RegistryIndex) -> Result<DependencyGraph, GraphError> {
        let mut pins = initial.pins().clone();
        let mut any = false;
        for d in self.upgrades() {
            pins.insert(d.package.clone(), d.to_version.clone());
            any = true;
        }
        if !any {
            return Ok(initial.clone());
        }
        resolve_pinned(initial.root(), initial.root_declarations().to_vec(), pins, reg)
    }
}

/// Stable releases strictly newer than `current`, ascending.
pub fn candidate_versions(
    reg: &RegistryIndex,
    package: &PackageId,
    current: &Version,
) -> Result<Vec<Version>, RegistryError> {
    reg.release(package, current)?;
    Ok(reg
        .releases_of(package)?
        .iter()
        .map(|r| &r.version)
        .filter(|v| is_stable(v) && *v > current)
        .cloned()
        .collect())
}

/// Candidates split into survivors and rejections, both ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filtered {
    pub kept: Vec<Version>,
    pub rejected: Vec<Rejection>,
}

/// Keeps candidates whose isolated closure is no larger than the current one.
pub fn filter_debloat(
    candidates: &[Version],
    package: &PackageId,
    current: &Version,
    reg: &RegistryIndex,
) -> Result<Filtered, RegistryError> {
    let mut out = Filtered::default();
    if candidates.is_empty() {
        return Ok(out);
    }
    let limit = reg.closure_size(package, current)?;
    for v in candidates {
        if reg.closure_size(package, v)? <= limit {
            out.kept.push(v.clone());
        } else {
            out.rejected.push(Rejection {
                version: v.clone(),
                reason: RejectReason::Debloat,
                evidence: Vec::new(),
            });
        }
    }
    Ok(out)
}

/// Keeps candidates that break no construct the project reaches, relative
/// to the current release.
pub fn filter_compat(
    candidates: &[Version],
    package: &PackageId,
    current: &Version,
    usage: &UsageModel,
    reg: &RegistryIndex,
) -> Result<Filtered, StepError> {
    filter_compat_against(candidates, package, std::slice::from_ref(current), usage, reg)
}

/// [`filter_compat`] against several reference releases at once; a
/// candidate survives only if it is compatible with every one of them.
pub fn filter_compat_against(
    candidates: &[Version],
    package: &PackageId,
    references: &[Version],
    usage: &UsageModel,
    reg: &RegistryIndex,
) -> Result<Filtered, StepError> {
    let mut out = Filtered::default();
    let references = references
        .iter()
        .map(|v| reg.release(package, v))
        .collect::<Result<Vec<_>, _>>()?;
    for v in candidates {
        let candidate = reg.release(package, v)?;
        let mut evidence = BTreeSet::new();
        for old in &references {
            evidence.extend(is_compatible(usage, package, old, candidate)?.evidence);
        }
        if evidence.is_empty() {
            out.kept.push(v.clone());
        } else {
            out.rejected.push(Rejection {
                version: v.clone(),
                reason: RejectReason::Incompatible,
                evidence: evidence.into_iter().collect(),
            });
        }
    }
    Ok(out)
}

/// Newest survivor, or `None` to keep the current version.
pub fn select_optimal(filtered: &[Version]) -> Option<&Version> {
    filtered.iter().max()
}

/// Decides one node given its current version. `original` is the version
/// the node had in the starting graph, when it was there.
fn decide(
    package: &PackageId,
    current: &Version,
    original: Option<&Version>,
    usage: &UsageModel,
    reg: &RegistryIndex,
) -> Result<NodeDecision, StepError> {
    let kept = |outcome, rejected| NodeDecision {
        package: package.clone(),
        from_version: current.clone(),
        to_version: current.clone(),
        outcome,
        rejected,
    };

    let candidates = candidate_versions(reg, package, current)?;
    if candidates.is_empty() {
        return Ok(kept(Outcome::KeptNoCandidates, Vec::new()));
    }
    let debloat = filter_debloat(&candidates, package, current, reg)?;

    let mut references = vec![current.clone()];
    if let Some(o) = original.filter(|o| *o != current) {
        references.push(o.clone());
    }
    let compat = filter_compat_against(&debloat.kept, package, &references, usage, reg)?;

    let mut rejected: Vec<Rejection> = debloat.rejected.into_iter().chain(compat.rejected).collect();
    rejected.sort_by(|a, b| a.version.cmp(&b.version));

    Ok(match select_optimal(&compat.kept) {
        Some(best) => NodeDecision {
            package: package.clone(),
            from_version: current.clone(),
            to_version: best.clone(),
            outcome: Outcome::Upgraded,
            rejected,
        },
        None => kept(Outcome::KeptAllFiltered, rejected),
    })
}

/// Runs the upgrade loop over `initial`.
///
/// Nodes are visited in [`traversal_order`] of the starting graph. After
/// every upgrade the graph is re-resolved, so later nodes are judged in
/// the updated context. Nodes that appear only after an upgrade are
/// appended to the order and visited once; nodes that disappeared before
/// their turn are reported as skipped.
pub fn plan_upgrades(
    initial: &DependencyGraph,
    reg: &RegistryIndex,
    usage: &UsageModel,
) -> Result<UpgradePlan, PlanError> {
    let metrics_before = graph_metrics(initial, reg).map_err(StepError::from)?;
    let original: BTreeMap<PackageId, Version> = initial
        .nodes()
        .iter()
        .map(|(p, n)| (p.clone(), n.version.clone()))
        .collect();

    let mut graph = initial.clone();
    let mut order = traversal_order(initial);
    let mut queued: BTreeSet<PackageId> = order.iter().cloned().collect();
    let mut last_seen = original.clone();
    let mut decisions = Vec::with_capacity(order.len());

    let mut i = 0;
    while i < order.len() {
        let package = order[i].clone();
        let wrap = |source: StepError| PlanError::Iteration {
            iteration: i,
            package: package.clone(),
            source,
        };

        let decision = match graph.version_of(&package) {
            None => {
                let v = last_seen[&package].clone();
                NodeDecision {
                    package: package.clone(),
                    from_version: v.clone(),
                    to_version: v,
                    outcome: Outcome::SkippedNodeVanished,
                    rejected: Vec::new(),
                }
            }
            Some(current) => {
                let current = current.clone();
                decide(&package, &current, original.get(&package), usage, reg).map_err(wrap)?
            }
        };

        if decision.outcome == Outcome::Upgraded {
            graph = update_graph(&graph, &package, &decision.to_version, reg)
                .map_err(|e| wrap(e.into()))?;
            for (p, n) in graph.nodes() {
                last_seen.insert(p.clone(), n.version.clone());
            }
            for p in traversal_order(&graph) {
                if queued.insert(p.clone()) {
                    order.push(p);
                }
            }
        }
        decisions.push(decision);
        i += 1;
    }

    let metrics_after = graph_metrics(&graph, reg).map_err(StepError::from)?;
    Ok(UpgradePlan {
        mode: Mode::Lagease,
        metrics_before,
        metrics_after,
        decisions,
    })
}

/// Bumps every direct dependency to its latest stable release, with no
/// filtering, and re-resolves once at the end.
pub fn baseline_direct_latest(initial: &DependencyGraph, reg: &RegistryIndex) -> Result<UpgradePlan, PlanError> {
    let metrics_before = graph_metrics(initial, reg).map_err(StepError::from)?;
    let mut pins = initial.pins().clone();
    let mut decisions = Vec::new();

    for d in initial.root_declarations() {
        let Some(current) = initial.version_of(&d.package) else {
            continue;
        };
        let latest = match reg.latest_stable(&d.package) {
            Ok(r) => Some(r.version.clone()),
            Err(RegistryError::NoStableRelease(_)) => None,
            Err(e) => return Err(StepError::from(e).into()),
        };
        let decision = match latest.filter(|l| l > current) {
            Some(latest) => {
                pins.insert(d.package.clone(), latest.clone());
                NodeDecision {
                    package: d.package.clone(),
                    from_version: current.clone(),
                    to_version: latest,
                    outcome: Outcome::Upgraded,
                    rejected: Vec::new(),
                }
            }
            None => NodeDecision {
                package: d.package.clone(),
                from_version: current.clone(),
                to_version: current.clone(),
                outcome: Outcome::KeptNoCandidates,
                rejected: Vec::new(),
            },
        };
        decisions.push(decision);
    }

    let final_graph = if decisions.iter().any(|d| d.outcome == Outcome::Upgraded) {
        resolve_pinned(initial.root(), initial.root_declarations().to_vec(), pins, reg)
            .map_err(StepError::from)?
    } else {
        initial.clone()
    };
    let metrics_after = graph_metrics(&final_graph, reg).map_err(StepError::from)?;
    Ok(UpgradePlan {
        mode: Mode::DirectLatest,
        metrics_before,
        metrics_after,
        decisions,
    })
}
