//! Maven `dependency:tree` text layout.
//!
//! ```text
//! com.example:app:jar:1.0
//! +- org.a:a:jar:1.0:compile
//! |  \- org.c:c:jar:2.0:compile
//! \- org.b:b:jar:1.1:test
//! ```

use std::collections::BTreeMap;

use super::{DependencyGraph, GraphError, NodeRef};
use crate::registry::{PackageId, Scope};
use crate::versioning::Version;

const BRANCH: &str = "+- ";
const LAST: &str = "\\- ";
const PIPE: &str = "|  ";
const BLANK: &str = "   ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeRoot {
    pub group: String,
    pub artifact: String,
    pub packaging: String,
    pub version: String,
}

impl TreeRoot {
    /// `group:artifact`.
    pub fn name(&self) -> String {
        format!("{}:{}", self.group, self.artifact)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub package: PackageId,
    pub packaging: String,
    pub version: Version,
    pub scope: Scope,
    /// 1 for children of the root.
    pub depth: usize,
    /// Index of the parent in [`ResolvedTree::nodes`]; `None` under the root.
    pub parent: Option<usize>,
}

/// A parsed tree dump, nodes in the order printed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedTree {
    pub root: TreeRoot,
    pub nodes: Vec<TreeNode>,
}

fn tree_err(line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Tree {
        line,
        message: message.into(),
    }
}

pub fn parse_dep_tree(text: &str) -> Result<ResolvedTree, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_prefix("[INFO] ").unwrap_or(l).trim_end()))
        .filter(|(_, l)| !l.is_empty());

    let (first_no, first) = lines.next().ok_or_else(|| tree_err(1, "empty dependency tree"))?;
    let fields: Vec<&str> = first.split(':').collect();
    if fields.len() != 4 || fields.iter().any(|f| f.is_empty()) {
        return Err(tree_err(
            first_no,
            format!("root coordinate {first:?} must be group:artifact:packaging:version"),
        ));
    }
    let root = TreeRoot {
        group: fields[0].to_string(),
        artifact: fields[1].to_string(),
        packaging: fields[2].to_string(),
        version: fields[3].to_string(),
    };

    let mut nodes: Vec<TreeNode> = Vec::new();
    // stack[d - 1] = index of the latest node at depth d
    let mut stack: Vec<usize> = Vec::new();
    for (no, line) in lines {
        let mut rest = line;
        let mut level = 0;
        while let Some(r) = rest.strip_prefix(PIPE).or_else(|| rest.strip_prefix(BLANK)) {
            rest = r;
            level += 1;
        }
        rest = rest
            .strip_prefix(BRANCH)
            .or_else(|| rest.strip_prefix(LAST))
            .ok_or_else(|| tree_err(no, format!("expected \"+- \" or \"\\- \" in {line:?}")))?;
        let depth = level + 1;
        if depth > stack.len() + 1 {
            return Err(tree_err(
                no,
                format!("indentation jumps to depth {depth} below depth {}", stack.len()),
            ));
        }

        let fields: Vec<&str> = rest.split(':').collect();
        if fields.len() != 5 || fields.iter().any(|f| f.is_empty()) {
            return Err(tree_err(
                no,
                format!("coordinate {rest:?} must be group:artifact:packaging:version:scope"),
            ));
        }
        let package = PackageId::new(fields[0], fields[1]).map_err(|e| tree_err(no, e.to_string()))?;
        let version: Version = fields[3].parse().map_err(|e| tree_err(no, format!("{e}")))?;
        let scope: Scope = fields[4].parse().map_err(|e: String| tree_err(no, e))?;

        stack.truncate(depth - 1);
        let parent = stack.last().copied();
        stack.push(nodes.len());
        nodes.push(TreeNode {
            package,
            packaging: fields[2].to_string(),
            version,
            scope,
            depth,
            parent,
        });
    }
    Ok(ResolvedTree { root, nodes })
}

/// Prints the graph's spanning tree in `dependency:tree` layout, each
/// package once, under the node that introduced it.
pub fn render_tree(g: &DependencyGraph) -> String {
    let mut children: BTreeMap<NodeRef, Vec<(usize, PackageId)>> = BTreeMap::new();
    for (p, n) in g.nodes() {
        children
            .entry(n.parent.clone())
            .or_default()
            .push((n.ordinal, p.clone()));
    }
    for list in children.values_mut() {
        list.sort();
    }

    let root_line = match g.root().split_once(':') {
        Some((group, artifact)) if !group.is_empty() && !artifact.is_empty() && !artifact.contains(':') => {
            format!("{group}:{artifact}:jar:0")
        }
        _ => format!("project:{}:jar:0", g.root().replace(':', "_")),
    };
    let mut out = root_line;
    out.push('\n');

    fn walk(
        g: &DependencyGraph,
        children: &BTreeMap<NodeRef, Vec<(usize, PackageId)>>,
        at: &NodeRef,
        prefix: &str,
        out: &mut String,
    ) {
        let Some(list) = children.get(at) else { return };
        for (i, (_, p)) in list.iter().enumerate() {
            let last = i + 1 == list.len();
            let node = &g.nodes()[p];
            out.push_str(prefix);
            out.push_str(if last { LAST } else { BRANCH });
            out.push_str(&format!(
                "{}:{}:jar:{}:{}\n",
                p.group,
                p.artifact,
                node.version,
                node.scope.as_str()
            ));
            let deeper = format!("{prefix}{}", if last { BLANK } else { PIPE });
            walk(g, children, &NodeRef::Package(p.clone()), &deeper, out);
        }
    }
    walk(g, &children, &NodeRef::Root, "", &mut out);
    out
}
