//! The project's resolved dependency graph.
//!
//! A graph is built either by resolving a [`RootManifest`] against the
//! registry ([`resolve_graph`]) or by parsing a Maven `dependency:tree` dump
//! and restoring the edges the dump hides ([`parse_dep_tree`] followed by
//! [`restore_edges`]). Either way the result holds exactly one node per
//! package and every declaration edge between nodes, not just the spanning
//! tree Maven prints.

mod resolve;
mod tree;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::registry::{DependencyDecl, PackageId, RegistryError, RegistryIndex, Scope};
use crate::versioning::Version;

pub use resolve::{resolve_graph, resolve_pinned, restore_edges};
pub use tree::{parse_dep_tree, render_tree, ResolvedTree, TreeNode, TreeRoot};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("dependency tree line {line}: {message}")]
    Tree { line: usize, message: String },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("cannot read manifest {path}: {source}")]
    ManifestIo {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    ManifestMalformed {
        path: String,
        source: serde_json::Error,
    },
    #[error("{0} is not a node of the graph")]
    UnknownNode(PackageId),
    #[error("tree places {child} under {parent}, but the registry release does not declare it")]
    UnbackedTreeEdge { parent: String, child: PackageId },
    #[error("tree lists {package} with conflicting versions {first} and {second}")]
    ConflictingTreeVersions {
        package: PackageId,
        first: Version,
        second: Version,
    },
}

/// The project's own declarations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootManifest {
    pub module_name: String,
    pub direct_dependencies: Vec<DependencyDecl>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    module: String,
    #[serde(default)]
    dependencies: Vec<DependencyDecl>,
}

impl RootManifest {
    pub fn new(
        module_name: impl Into<String>,
        direct_dependencies: Vec<DependencyDecl>,
    ) -> Result<Self, GraphError> {
        let module_name = module_name.into();
        if module_name.is_empty() {
            return Err(GraphError::InvalidManifest("module name is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for d in &direct_dependencies {
            if !seen.insert(&d.package) {
                return Err(GraphError::InvalidManifest(format!(
                    "{} is declared more than once",
                    d.package
                )));
            }
        }
        Ok(RootManifest {
            module_name,
            direct_dependencies,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Self::from_json_named(text, "<memory>")
    }

    fn from_json_named(text: &str, path: &str) -> Result<Self, GraphError> {
        let doc: ManifestDoc =
            serde_json::from_str(text).map_err(|source| GraphError::ManifestMalformed {
                path: path.to_string(),
                source,
            })?;
        Self::new(doc.module, doc.dependencies)
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| GraphError::ManifestIo {
            path: name.clone(),
            source,
        })?;
        Self::from_json_named(&text, &name)
    }

    pub fn to_json(&self) -> String {
        let doc = ManifestDoc {
            module: self.module_name.clone(),
            dependencies: self.direct_dependencies.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("manifest serializes")
    }
}

/// Source of an edge: the project root or a package node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Root,
    Package(PackageId),
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Root => f.write_str("<root>"),
            NodeRef::Package(p) => p.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    /// Mediated version.
    pub version: Version,
    /// Breadth-first distance from the root.
    pub depth: usize,
    /// Scope of the declaration that introduced the node.
    pub scope: Scope,
    /// Parent in the spanning tree Maven would print.
    pub parent: NodeRef,
    /// Discovery order; orders siblings when rendering.
    pub ordinal: usize,
}

/// A declaration edge between two nodes, carrying the version the
/// declaring side asked for (which may differ from the mediated one).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: NodeRef,
    pub to: PackageId,
    pub declared: Version,
}

/// A declaration whose target is not a node of the graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DanglingDeclaration {
    pub from: PackageId,
    pub target: PackageId,
    pub version: Version,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    root: String,
    root_decls: Vec<DependencyDecl>,
    pins: BTreeMap<PackageId, Version>,
    nodes: BTreeMap<PackageId, Node>,
    edges: BTreeMap<(NodeRef, PackageId), Version>,
    dangling: Vec<DanglingDeclaration>,
}

/// A node as discovered by resolution or tree parsing, before edges exist.
pub(crate) struct Discovered {
    pub package: PackageId,
    pub version: Version,
    pub scope: Scope,
    pub parent: NodeRef,
}

impl DependencyGraph {
    /// Builds the graph from discovered nodes by restoring every declaration
    /// edge between them and recomputing depths.
    pub(crate) fn assemble(
        root: String,
        root_decls: Vec<DependencyDecl>,
        pins: BTreeMap<PackageId, Version>,
        discovered: Vec<Discovered>,
        reg: &RegistryIndex,
    ) -> Result<Self, GraphError> {
        let mut nodes = BTreeMap::new();
        for (ordinal, d) in discovered.into_iter().enumerate() {
            nodes.insert(
                d.package,
                Node {
                    version: d.version,
                    depth: usize::MAX,
                    scope: d.scope,
                    parent: d.parent,
                    ordinal,
                },
            );
        }

        let mut edges = BTreeMap::new();
        for d in &root_decls {
            if nodes.contains_key(&d.package) {
                let declared = pins.get(&d.package).unwrap_or(&d.version).clone();
                edges
                    .entry((NodeRef::Root, d.package.clone()))
                    .or_insert(declared);
            }
        }
        let mut dangling = Vec::new();
        for (p, node) in &nodes {
            let release = reg.release(p, &node.version)?;
            for d in release.dependencies.iter().filter(|d| d.scope.is_valid()) {
                if nodes.contains_key(&d.package) {
                    edges
                        .entry((NodeRef::Package(p.clone()), d.package.clone()))
                        .or_insert_with(|| d.version.clone());
                } else {
                    dangling.push(DanglingDeclaration {
                        from: p.clone(),
                        target: d.package.clone(),
                        version: d.version.clone(),
                    });
                }
            }
        }

        let mut graph = DependencyGraph {
            root,
            root_decls,
            pins,
            nodes,
            edges,
            dangling,
        };
        graph.recompute_depths();
        Ok(graph)
    }

    fn recompute_depths(&mut self) {
        let mut adjacency: BTreeMap<&NodeRef, Vec<&PackageId>> = BTreeMap::new();
        for (from, to) in self.edges.keys() {
            adjacency.entry(from).or_default().push(to);
        }
        let mut depth: BTreeMap<PackageId, usize> = BTreeMap::new();
        let mut queue: VecDeque<(NodeRef, usize)> = VecDeque::from([(NodeRef::Root, 0)]);
        while let Some((at, d)) = queue.pop_front() {
            for &next in adjacency.get(&at).map(Vec::as_slice).unwrap_or_default() {
                if !depth.contains_key(next) {
                    depth.insert(next.clone(), d + 1);
                    queue.push_back((NodeRef::Package(next.clone()), d + 1));
                }
            }
        }
        for (p, node) in self.nodes.iter_mut() {
            node.depth = depth.get(p).copied().unwrap_or(usize::MAX);
        }
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    /// Root declarations (compile and runtime only) in declaration order.
    pub fn root_declarations(&self) -> &[DependencyDecl] {
        &self.root_decls
    }

    /// Versions forced by earlier upgrades.
    pub fn pins(&self) -> &BTreeMap<PackageId, Version> {
        &self.pins
    }

    pub fn nodes(&self) -> &BTreeMap<PackageId, Node> {
        &self.nodes
    }

    pub fn node(&self, p: &PackageId) -> Option<&Node> {
        self.nodes.get(p)
    }

    pub fn contains(&self, p: &PackageId) -> bool {
        self.nodes.contains_key(p)
    }

    pub fn version_of(&self, p: &PackageId) -> Option<&Version> {
        self.nodes.get(p).map(|n| &n.version)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|((from, to), declared)| Edge {
            from: from.clone(),
            to: to.clone(),
            declared: declared.clone(),
        })
    }

    /// Packages that `from` declares and that are nodes.
    pub fn successors<'a>(&'a self, from: &'a NodeRef) -> impl Iterator<Item = &'a PackageId> + 'a {
        self.edges
            .range((from.clone(), min_package())..)
            .take_while(move |((f, _), _)| f == from)
            .map(|((_, to), _)| to)
    }

    /// Packages the root declares directly.
    pub fn direct_dependencies(&self) -> impl Iterator<Item = &PackageId> {
        self.edges
            .keys()
            .filter(|(from, _)| *from == NodeRef::Root)
            .map(|(_, to)| to)
    }

    pub fn dangling_declarations(&self) -> &[DanglingDeclaration] {
        &self.dangling
    }

    /// `(package, version, depth)` for every node.
    pub fn node_set(&self) -> BTreeSet<(PackageId, Version, usize)> {
        self.nodes
            .iter()
            .map(|(p, n)| (p.clone(), n.version.clone(), n.depth))
            .collect()
    }

    /// Every edge with its declared version rendered as written.
    pub fn edge_set(&self) -> BTreeSet<(NodeRef, PackageId, String)> {
        self.edges
            .iter()
            .map(|((f, t), v)| (f.clone(), t.clone(), v.to_string()))
            .collect()
    }
}

fn min_package() -> PackageId {
    PackageId {
        group: String::new(),
        artifact: String::new(),
    }
}

/// Re-resolves the graph with `package` pinned to `new_version` on top of
/// all earlier pins. Packages nobody declares any more drop out; new
/// transitive packages come in at their resolved depth.
pub fn update_graph(
    g: &DependencyGraph,
    package: &PackageId,
    new_version: &Version,
    reg: &RegistryIndex,
) -> Result<DependencyGraph, GraphError> {
    if !g.contains(package) {
        return Err(GraphError::UnknownNode(package.clone()));
    }
    reg.release(package, new_version)?;
    let mut pins = g.pins.clone();
    pins.insert(package.clone(), new_version.clone());
    resolve_pinned(&g.root, g.root_decls.clone(), pins, reg)
}

/// Aggregate size and lag of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub node_count: u64,
    pub total_version_lag: u64,
    pub total_time_lag_days: u64,
}

pub fn graph_metrics(g: &DependencyGraph, reg: &RegistryIndex) -> Result<GraphMetrics, GraphError> {
    let mut m = GraphMetrics {
        node_count: g.node_count() as u64,
        ..GraphMetrics::default()
    };
    for (p, node) in g.nodes() {
        let lag = reg.lag(p, &node.version)?;
        m.total_version_lag += lag.version_lag;
        m.total_time_lag_days += lag.time_lag;
    }
    Ok(m)
}
