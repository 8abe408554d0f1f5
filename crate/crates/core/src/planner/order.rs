use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::graph::{DependencyGraph, NodeRef};
use crate::registry::PackageId;

/// Dependents before dependencies, shallow first.
///
/// Kahn's algorithm over the package nodes, always releasing the ready
/// node with the smallest `(depth, id)`. When every remaining node still
/// waits on another, the remaining graph has a cycle: the smallest node of
/// a source component is released and its incoming edges from that
/// component are ignored for ordering.
pub fn traversal_order(g: &DependencyGraph) -> Vec<PackageId> {
    let ids: Vec<&PackageId> = g.nodes().keys().collect();
    let index: BTreeMap<&PackageId, usize> = ids.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let key = |i: usize| (g.nodes()[ids[i]].depth, ids[i].clone());

    let n = ids.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, p) in ids.iter().enumerate() {
        for to in g.successors(&NodeRef::Package((*p).clone())) {
            let j = index[to];
            succ[i].push(j);
            pred[j].push(i);
        }
    }

    let mut indegree: Vec<usize> = pred.iter().map(Vec::len).collect();
    let mut done = vec![false; n];
    let mut queued = vec![false; n];
    let mut ready = BinaryHeap::new();
    for i in 0..n {
        if indegree[i] == 0 {
            queued[i] = true;
            ready.push(Reverse(key(i)));
        }
    }

    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let Some(Reverse((_, p))) = ready.pop() else {
            let i = cycle_entry(&succ, &pred, &done, &key);
            indegree[i] = 0;
            queued[i] = true;
            ready.push(Reverse(key(i)));
            continue;
        };
        let i = index[&p];
        done[i] = true;
        order.push(p);
        for &j in &succ[i] {
            if done[j] || queued[j] {
                continue;
            }
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queued[j] = true;
                ready.push(Reverse(key(j)));
            }
        }
    }
    order
}

/// Smallest remaining node whose strongly connected component has no
/// incoming edge from another remaining component.
fn cycle_entry<K: Ord>(
    succ: &[Vec<usize>],
    pred: &[Vec<usize>],
    done: &[bool],
    key: &impl Fn(usize) -> K,
) -> usize {
    let mut remaining: Vec<usize> = (0..succ.len()).filter(|&i| !done[i]).collect();
    remaining.sort_by_key(|&i| key(i));
    for &x in &remaining {
        let forward = reach(x, succ, done);
        let backward = reach(x, pred, done);
        if backward.iter().zip(&forward).all(|(&b, &f)| !b || f) {
            return x;
        }
    }
    unreachable!("a finite graph always has a source component")
}

fn reach(start: usize, adjacency: &[Vec<usize>], done: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; adjacency.len()];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        for &j in &adjacency[i] {
            if !done[j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}
