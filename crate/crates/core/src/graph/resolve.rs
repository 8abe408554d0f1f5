use std::collections::{BTreeMap, BTreeSet};

use super::{DependencyGraph, Discovered, GraphError, NodeRef, ResolvedTree};
use crate::registry::{DependencyDecl, PackageId, RegistryIndex};
use crate::versioning::Version;

/// Resolves a manifest breadth-first with nearest-wins mediation.
///
/// The shallowest declaration of a package fixes its version; among
/// declarations at the same depth the one met first wins, where parents
/// are visited in discovery order and each parent's declarations in the
/// order written. Test and provided declarations are ignored everywhere.
pub fn resolve_graph(
    manifest: &super::RootManifest,
    reg: &RegistryIndex,
) -> Result<DependencyGraph, GraphError> {
    let decls = manifest
        .direct_dependencies
        .iter()
        .filter(|d| d.scope.is_valid())
        .cloned()
        .collect();
    resolve_pinned(&manifest.module_name, decls, BTreeMap::new(), reg)
}

/// [`resolve_graph`] with some packages forced to a version wherever they
/// are reached.
pub fn resolve_pinned(
    root: &str,
    root_decls: Vec<DependencyDecl>,
    pins: BTreeMap<PackageId, Version>,
    reg: &RegistryIndex,
) -> Result<DependencyGraph, GraphError> {
    let mut discovered: Vec<Discovered> = Vec::new();
    let mut seen: BTreeSet<PackageId> = BTreeSet::new();

    let mut admit = |decl: &DependencyDecl, parent: NodeRef, discovered: &mut Vec<Discovered>| -> Result<(), GraphError> {
        if !decl.scope.is_valid() || !seen.insert(decl.package.clone()) {
            return Ok(());
        }
        let version = pins.get(&decl.package).unwrap_or(&decl.version).clone();
        reg.release(&decl.package, &version)?;
        discovered.push(Discovered {
            package: decl.package.clone(),
            version,
            scope: decl.scope,
            parent,
        });
        Ok(())
    };

    for d in &root_decls {
        admit(d, NodeRef::Root, &mut discovered)?;
    }
    // `discovered` doubles as the breadth-first queue.
    let mut next = 0;
    while next < discovered.len() {
        let (package, version) = (discovered[next].package.clone(), discovered[next].version.clone());
        let release = reg.release(&package, &version)?;
        for d in &release.dependencies {
            admit(d, NodeRef::Package(package.clone()), &mut discovered)?;
        }
        next += 1;
    }

    DependencyGraph::assemble(root.to_string(), root_decls, pins, discovered, reg)
}

/// Turns a parsed `dependency:tree` dump into a complete graph.
///
/// Test and provided nodes are dropped together with their subtrees. For
/// every remaining node, each compile or runtime declaration of its
/// registry release that targets another node becomes an edge, including
/// the ones the dump left out because the target was printed elsewhere.
pub fn restore_edges(tree: &ResolvedTree, reg: &RegistryIndex) -> Result<DependencyGraph, GraphError> {
    let mut kept = vec![false; tree.nodes.len()];
    let mut discovered: Vec<Discovered> = Vec::new();
    let mut versions: BTreeMap<PackageId, Version> = BTreeMap::new();
    let mut root_decls = Vec::new();

    for (i, n) in tree.nodes.iter().enumerate() {
        let parent_kept = n.parent.is_none_or(|p| kept[p]);
        if !parent_kept || !n.scope.is_valid() {
            continue;
        }
        kept[i] = true;
        reg.release(&n.package, &n.version)?;

        if let Some(first) = versions.get(&n.package) {
            if first != &n.version {
                return Err(GraphError::ConflictingTreeVersions {
                    package: n.package.clone(),
                    first: first.clone(),
                    second: n.version.clone(),
                });
            }
            if n.parent.is_none() && !root_decls.iter().any(|d: &DependencyDecl| d.package == n.package) {
                root_decls.push(DependencyDecl::new(n.package.clone(), n.version.clone(), n.scope));
            }
            continue;
        }

        let parent = match n.parent {
            None => NodeRef::Root,
            Some(p) => {
                let parent = &tree.nodes[p];
                let release = reg.release(&parent.package, &parent.version)?;
                let declared = release
                    .dependencies
                    .iter()
                    .any(|d| d.scope.is_valid() && d.package == n.package);
                if !declared {
                    return Err(GraphError::UnbackedTreeEdge {
                        parent: parent.package.at(&parent.version),
                        child: n.package.clone(),
                    });
                }
                NodeRef::Package(parent.package.clone())
            }
        };
        if parent == NodeRef::Root {
            root_decls.push(DependencyDecl::new(n.package.clone(), n.version.clone(), n.scope));
        }
        versions.insert(n.package.clone(), n.version.clone());
        discovered.push(Discovered {
            package: n.package.clone(),
            version: n.version.clone(),
            scope: n.scope,
            parent,
        });
    }

    DependencyGraph::assemble(tree.root.name(), root_decls, BTreeMap::new(), discovered, reg)
}
