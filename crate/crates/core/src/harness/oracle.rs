//! Independent replay of an upgrade plan.
//!
//! Everything here is re-derived with plain set scans: level-by-level
//! resolution, fixpoint reachability, quadratic ordering. Only the input
//! types and version ordering are shared with the planner.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::compat::{ConstructId, Owner, UsageModel};
use crate::graph::{DependencyGraph, GraphMetrics, NodeRef};
use crate::planner::{Mode, NodeDecision, Outcome, RejectReason, UpgradePlan};
use crate::registry::{DependencyDecl, PackageId, RegistryIndex};
use crate::versioning::Version;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    /// Position in the decision list, when the problem is tied to one.
    pub decision: Option<usize>,
    pub package: Option<PackageId>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub divergences: Vec<Divergence>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.divergences.is_empty()
    }

    fn fail(decision: Option<usize>, package: Option<&PackageId>, message: String) -> Verdict {
        Verdict {
            divergences: vec![Divergence {
                decision,
                package: package.cloned(),
                message,
            }],
        }
    }
}

#[derive(Clone)]
struct State {
    nodes: BTreeMap<PackageId, (Version, usize)>,
    edges: BTreeSet<(PackageId, PackageId)>,
}

impl State {
    fn from_graph(g: &DependencyGraph) -> State {
        State {
            nodes: g
                .nodes()
                .iter()
                .map(|(p, n)| (p.clone(), (n.version.clone(), n.depth)))
                .collect(),
            edges: g
                .edges()
                .filter_map(|e| match e.from {
                    NodeRef::Package(f) => Some((f, e.to)),
                    NodeRef::Root => None,
                })
                .collect(),
        }
    }

    fn version(&self, p: &PackageId) -> Option<&Version> {
        self.nodes.get(p).map(|(v, _)| v)
    }
}

fn resolve(
    decls: &[DependencyDecl],
    pins: &BTreeMap<PackageId, Version>,
    reg: &RegistryIndex,
) -> Option<State> {
    let mut nodes: BTreeMap<PackageId, (Version, usize)> = BTreeMap::new();
    let mut level: Vec<(PackageId, Version)> = decls
        .iter()
        .filter(|d| d.scope.is_valid())
        .map(|d| (d.package.clone(), d.version.clone()))
        .collect();
    let mut depth = 1;
    while !level.is_empty() {
        let mut fresh = Vec::new();
        for (p, v) in level {
            if !nodes.contains_key(&p) {
                let v = pins.get(&p).cloned().unwrap_or(v);
                nodes.insert(p.clone(), (v, depth));
                fresh.push(p);
            }
        }
        let mut next = Vec::new();
        for p in fresh {
            let release = reg.release(&p, &nodes[&p].0).ok()?;
            for d in release.dependencies.iter().filter(|d| d.scope.is_valid()) {
                next.push((d.package.clone(), d.version.clone()));
            }
        }
        level = next;
        depth += 1;
    }
    let mut edges = BTreeSet::new();
    for (p, (v, _)) in &nodes {
        for d in &reg.release(p, v).ok()?.dependencies {
            if d.scope.is_valid() && nodes.contains_key(&d.package) {
                edges.insert((p.clone(), d.package.clone()));
            }
        }
    }
    Some(State { nodes, edges })
}

fn closure_size(reg: &RegistryIndex, p: &PackageId, v: &Version) -> Option<usize> {
    let decl = DependencyDecl::new(p.clone(), v.clone(), crate::registry::Scope::Compile);
    resolve(&[decl], &BTreeMap::new(), reg).map(|s| s.nodes.len() - 1)
}

fn reachable(usage: &UsageModel) -> BTreeSet<ConstructId> {
    let mut reached: BTreeSet<ConstructId> = usage.entries().clone();
    loop {
        let before = reached.len();
        for (a, b) in usage.edges() {
            if reached.contains(a) {
                reached.insert(b.clone());
            }
        }
        if reached.len() == before {
            return reached;
        }
    }
}

fn stable(v: &Version) -> bool {
    const PRE: [&str; 5] = ["alpha", "beta", "milestone", "rc", "snapshot"];
    !v.segments()
        .iter()
        .any(|s| matches!(s, crate::versioning::Segment::Qualifier(q) if PRE.contains(&q.as_str())))
}

fn metrics(state: &State, reg: &RegistryIndex) -> Option<GraphMetrics> {
    let mut m = GraphMetrics {
        node_count: state.nodes.len() as u64,
        ..GraphMetrics::default()
    };
    for (p, (v, _)) in &state.nodes {
        let releases = reg.releases_of(p).ok()?;
        let newer: Vec<_> = releases.iter().filter(|r| stable(&r.version) && &r.version > v).collect();
        m.total_version_lag += newer.len() as u64;
        if let Some(latest) = newer.last() {
            let current = reg.release(p, v).ok()?;
            m.total_time_lag_days += (latest.released_at - current.released_at).num_days().max(0) as u64;
        }
    }
    Some(m)
}

/// Order by repeatedly taking the smallest `(depth, id)` node with no
/// remaining predecessors; on a cycle, the smallest node whose every
/// remaining ancestor is also its descendant.
fn order(state: &State) -> Vec<PackageId> {
    let mut remaining: BTreeSet<PackageId> = state.nodes.keys().cloned().collect();
    let mut freed: BTreeSet<PackageId> = BTreeSet::new();
    let key = |p: &PackageId| (state.nodes[p].1, p.clone());
    let mut out = Vec::new();

    let reach = |from: &PackageId, remaining: &BTreeSet<PackageId>, forward: bool| {
        let mut seen = BTreeSet::from([from.clone()]);
        loop {
            let before = seen.len();
            for (a, b) in &state.edges {
                let (src, dst) = if forward { (a, b) } else { (b, a) };
                if seen.contains(src) && remaining.contains(dst) {
                    seen.insert(dst.clone());
                }
            }
            if seen.len() == before {
                return seen;
            }
        }
    };

    while !remaining.is_empty() {
        let ready = remaining
            .iter()
            .filter(|p| {
                freed.contains(*p)
                    || !state.edges.iter().any(|(a, b)| b == *p && remaining.contains(a))
            })
            .min_by_key(|p| key(p))
            .cloned();
        let next = match ready {
            Some(p) => p,
            None => {
                let mut by_key: Vec<&PackageId> = remaining.iter().collect();
                by_key.sort_by_key(|p| key(p));
                let entry = by_key
                    .into_iter()
                    .find(|x| reach(x, &remaining, false).is_subset(&reach(x, &remaining, true)))
                    .expect("source component exists")
                    .clone();
                freed.insert(entry);
                continue;
            }
        };
        remaining.remove(&next);
        out.push(next);
    }
    out
}

struct Expected {
    outcome: Outcome,
    to: Version,
    rejected: BTreeSet<(Version, RejectReason, Vec<ConstructId>)>,
}

fn expect_decision(
    p: &PackageId,
    current: &Version,
    original: Option<&Version>,
    usage: &UsageModel,
    used: &BTreeSet<ConstructId>,
    reg: &RegistryIndex,
) -> Option<Expected> {
    let candidates: Vec<Version> = reg
        .releases_of(p)
        .ok()?
        .iter()
        .map(|r| r.version.clone())
        .filter(|v| stable(v) && v > current)
        .collect();
    if candidates.is_empty() {
        return Some(Expected {
            outcome: Outcome::KeptNoCandidates,
            to: current.clone(),
            rejected: BTreeSet::new(),
        });
    }
    let limit = closure_size(reg, p, current)?;
    let mut references = vec![current.clone()];
    if let Some(o) = original.filter(|o| *o != current) {
        references.push(o.clone());
    }

    let mut survivors = Vec::new();
    let mut rejected = BTreeSet::new();
    for c in candidates {
        if closure_size(reg, p, &c)? > limit {
            rejected.insert((c, RejectReason::Debloat, Vec::new()));
            continue;
        }
        let new_api = &reg.release(p, &c).ok()?.api;
        let mut evidence = BTreeSet::new();
        for r in &references {
            let old_api = &reg.release(p, r).ok()?.api;
            for (id, fp) in &old_api.entries {
                let broken = new_api.entries.get(id) != Some(fp);
                let owned = usage.owner(id) == Some(&Owner::Package(p.clone()));
                if broken && owned && used.contains(id) {
                    evidence.insert(id.clone());
                }
            }
        }
        if evidence.is_empty() {
            survivors.push(c);
        } else {
            rejected.insert((c, RejectReason::Incompatible, evidence.into_iter().collect()));
        }
    }
    Some(match survivors.iter().max() {
        Some(best) => Expected {
            outcome: Outcome::Upgraded,
            to: best.clone(),
            rejected,
        },
        None => Expected {
            outcome: Outcome::KeptAllFiltered,
            to: current.clone(),
            rejected,
        },
    })
}

fn check_decision(i: usize, d: &NodeDecision, from: &Version, want: &Expected) -> Option<Verdict> {
    let fail = |m: String| Some(Verdict::fail(Some(i), Some(&d.package), m));
    if &d.from_version != from {
        return fail(format!("from {} but the node was at {from}", d.from_version));
    }
    if d.outcome != want.outcome {
        return fail(format!(
            "outcome {} but expected {}",
            d.outcome.as_str(),
            want.outcome.as_str()
        ));
    }
    if d.to_version != want.to || d.to_version.raw() != want.to.raw() {
        return fail(format!("to {} but expected {}", d.to_version, want.to));
    }
    let got: BTreeSet<_> = d
        .rejected
        .iter()
        .map(|r| (r.version.clone(), r.reason, r.evidence.clone()))
        .collect();
    if got != want.rejected || got.len() != d.rejected.len() {
        return fail("rejections differ from an exhaustive filter run".to_string());
    }
    None
}

/// Replays `plan` from `initial` and reports the first place it disagrees
/// with an exhaustive re-evaluation. `usage` is required for lagease plans.
pub fn oracle_verify_plan(
    plan: &UpgradePlan,
    initial: &DependencyGraph,
    reg: &RegistryIndex,
    usage: &UsageModel,
) -> Verdict {
    match replay(plan, initial, reg, usage) {
        Some(v) => v,
        None => Verdict::fail(None, None, "plan references releases missing from the registry".into()),
    }
}

fn replay(plan: &UpgradePlan, initial: &DependencyGraph, reg: &RegistryIndex, usage: &UsageModel) -> Option<Verdict> {
    let start = State::from_graph(initial);
    if plan.metrics_before != metrics(&start, reg)? {
        return Some(Verdict::fail(None, None, "metrics_before do not match the initial graph".into()));
    }
    let decls = initial.root_declarations();
    let mut pins = initial.pins().clone();

    let end = match plan.mode {
        Mode::DirectLatest => {
            let direct: Vec<&DependencyDecl> = decls.iter().filter(|d| start.nodes.contains_key(&d.package)).collect();
            if direct.len() != plan.decisions.len() {
                return Some(Verdict::fail(None, None, format!(
                    "{} decisions for {} direct dependencies",
                    plan.decisions.len(),
                    direct.len()
                )));
            }
            for (i, (d, got)) in direct.iter().zip(&plan.decisions).enumerate() {
                if got.package != d.package {
                    return Some(Verdict::fail(Some(i), Some(&got.package), format!("expected {} here", d.package)));
                }
                let current = start.version(&d.package)?;
                let latest = reg
                    .releases_of(&d.package)
                    .ok()?
                    .iter()
                    .map(|r| &r.version)
                    .filter(|v| stable(v))
                    .max();
                let want = match latest.filter(|l| *l > current) {
                    Some(l) => Expected { outcome: Outcome::Upgraded, to: l.clone(), rejected: BTreeSet::new() },
                    None => Expected {
                        outcome: Outcome::KeptNoCandidates,
                        to: current.clone(),
                        rejected: BTreeSet::new(),
                    },
                };
                if let Some(v) = check_decision(i, got, current, &want) {
                    return Some(v);
                }
                if want.outcome == Outcome::Upgraded {
                    pins.insert(d.package.clone(), want.to);
                }
            }
            if plan.decisions.iter().any(|d| d.outcome == Outcome::Upgraded) {
                resolve(decls, &pins, reg)?
            } else {
                start.clone()
            }
        }
        Mode::Lagease => {
            let used = reachable(usage);
            let mut state = start.clone();
            let mut queue = order(&start);
            let mut queued: BTreeSet<PackageId> = queue.iter().cloned().collect();
            let mut last_seen: BTreeMap<PackageId, Version> =
                start.nodes.iter().map(|(p, (v, _))| (p.clone(), v.clone())).collect();

            let mut i = 0;
            while i < queue.len() {
                let p = queue[i].clone();
                let Some(got) = plan.decisions.get(i) else {
                    return Some(Verdict::fail(Some(i), Some(&p), "plan ends before this node was decided".into()));
                };
                if got.package != p {
                    return Some(Verdict::fail(Some(i), Some(&got.package), format!("expected {p} at this position")));
                }
                let (from, want) = match state.version(&p) {
                    None => {
                        let v = last_seen[&p].clone();
                        (v.clone(), Expected { outcome: Outcome::SkippedNodeVanished, to: v, rejected: BTreeSet::new() })
                    }
                    Some(current) => {
                        let want = expect_decision(&p, current, start.version(&p), usage, &used, reg)?;
                        (current.clone(), want)
                    }
                };
                if let Some(v) = check_decision(i, got, &from, &want) {
                    return Some(v);
                }
                if want.outcome == Outcome::Upgraded {
                    pins.insert(p.clone(), want.to);
                    state = resolve(decls, &pins, reg)?;
                    for (q, (v, _)) in &state.nodes {
                        last_seen.insert(q.clone(), v.clone());
                    }
                    for q in order(&state) {
                        if queued.insert(q.clone()) {
                            queue.push(q);
                        }
                    }
                }
                i += 1;
            }
            if plan.decisions.len() != queue.len() {
                return Some(Verdict::fail(
                    Some(queue.len()),
                    plan.decisions.get(queue.len()).map(|d| &d.package),
                    "plan has decisions for nodes that were never visited".into(),
                ));
            }
            state
        }
    };

    if plan.metrics_after != metrics(&end, reg)? {
        return Some(Verdict::fail(None, None, "metrics_after do not match the final graph".into()));
    }
    Some(Verdict::default())
}
