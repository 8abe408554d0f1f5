use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use laglift::compat::{breaking_changes, ApiSurface, ConstructId, Fingerprint, Owner, UsageModel};
use laglift::graph::{resolve_graph, update_graph, RootManifest};
use laglift::harness::{gen_ecosystem, EcosystemParams};
use laglift::registry::{DependencyDecl, RegistryIndex, Scope};
use laglift::versioning::{compare_versions, is_stable, version_lag, Version};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => (0u64..25).prop_map(|n| n.to_string()),
        1 => prop::sample::select(vec!["alpha", "beta", "milestone", "rc", "snapshot", "sp", "SP", "Final", "foo", "RC"])
            .prop_map(str::to_string),
    ]
}

fn version_text() -> impl Strategy<Value = String> {
    (token(), prop::collection::vec((prop::sample::select(vec![".", "-"]), token()), 0..5)).prop_map(|(first, rest)| {
        let mut s = first;
        for (sep, t) in rest {
            s.push_str(sep);
            s.push_str(&t);
        }
        s
    })
}

fn version() -> impl Strategy<Value = Version> {
    version_text().prop_map(|s| s.parse().unwrap())
}

proptest! {
    #[test]
    fn parse_keeps_raw_text(text in version_text()) {
        let v: Version = text.parse().unwrap();
        prop_assert_eq!(v.raw(), text.as_str());
        prop_assert_eq!(v.to_string(), text);
    }

    #[test]
    fn ordering_is_total(a in version(), b in version(), c in version()) {
        prop_assert_eq!(compare_versions(&a, &b), compare_versions(&b, &a).reverse());
        prop_assert_eq!(compare_versions(&a, &a), Ordering::Equal);
        if a <= b && b <= c {
            prop_assert!(a <= c, "{} <= {} <= {} but not {} <= {}", a, b, c, a, c);
        }
        prop_assert_eq!(a == b, compare_versions(&a, &b) == Ordering::Equal);
    }

    #[test]
    fn trailing_zeros_do_not_matter(a in version(), zeros in 1usize..4) {
        let padded: Version = format!("{}{}", a.raw(), ".0".repeat(zeros)).parse().unwrap();
        prop_assert_eq!(compare_versions(&a, &padded), Ordering::Equal);
    }

    #[test]
    fn version_lag_counts_newer_stable(list in prop::collection::vec(version(), 1..20), pick in any::<prop::sample::Index>()) {
        let current = pick.get(&list);
        let expected = list.iter().filter(|r| is_stable(r) && compare_versions(current, r) == Ordering::Less).count() as u64;
        prop_assert_eq!(version_lag(current, &list).unwrap(), expected);
    }

    #[test]
    fn version_lag_never_grows_on_upgrade(list in prop::collection::vec(version(), 1..20), pick in any::<prop::sample::Index>()) {
        let current = pick.get(&list);
        let before = version_lag(current, &list).unwrap();
        for newer in list.iter().filter(|r| is_stable(r) && *r > current) {
            prop_assert!(version_lag(newer, &list).unwrap() < before);
        }
    }
}

fn surface(entries: &BTreeMap<u8, u32>) -> ApiSurface {
    let mut s = ApiSurface::new();
    for (k, fp) in entries {
        s.entries.insert(ConstructId::method(&format!("g.T#m{k}()")), Fingerprint(*fp));
    }
    s
}

proptest! {
    #[test]
    fn breaking_changes_match_set_difference(
        old in prop::collection::btree_map(0u8..12, 0u32..3, 0..12),
        new in prop::collection::btree_map(0u8..12, 0u32..3, 0..12),
    ) {
        let (o, n) = (surface(&old), surface(&new));
        let got = breaking_changes(&o, &n).all();
        let expected: BTreeSet<ConstructId> = o
            .entries
            .iter()
            .filter(|(k, fp)| n.entries.get(*k) != Some(*fp))
            .map(|(k, _)| k.clone())
            .collect();
        prop_assert_eq!(got, expected);
        prop_assert!(breaking_changes(&o, &o).is_empty());
    }

    #[test]
    fn dropping_constructs_only_adds_breaks(
        old in prop::collection::btree_map(0u8..12, 0u32..3, 0..12),
        new in prop::collection::btree_map(0u8..12, 0u32..3, 0..12),
        drop in prop::collection::btree_set(0u8..12, 0..6),
    ) {
        let o = surface(&old);
        let fewer: BTreeMap<u8, u32> = new.iter().filter(|(k, _)| !drop.contains(k)).map(|(k, v)| (*k, *v)).collect();
        let wide = breaking_changes(&o, &surface(&new)).all();
        let narrow = breaking_changes(&o, &surface(&fewer)).all();
        prop_assert!(wide.is_subset(&narrow));
    }
}

fn construct(i: usize) -> ConstructId {
    ConstructId::method(&format!("c.C{i}#f()"))
}

fn usage_model(n: usize, entry_count: usize, edges: &[(usize, usize)]) -> UsageModel {
    let owners = (0..n).map(|i| {
        let owner = if i < entry_count { Owner::Project } else { Owner::Package("g:lib".parse().unwrap()) };
        (construct(i), owner)
    });
    UsageModel::new(
        (0..entry_count).map(construct),
        edges.iter().map(|&(a, b)| (construct(a), construct(b))),
        owners,
    )
    .unwrap()
}

/// Transitive closure of the adjacency matrix, Warshall style.
#[allow(clippy::needless_range_loop)]
fn closure_reachable(n: usize, entry_count: usize, edges: &[(usize, usize)]) -> BTreeSet<ConstructId> {
    let mut m = vec![vec![false; n]; n];
    for i in 0..n {
        m[i][i] = true;
    }
    for &(a, b) in edges {
        m[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n)
        .filter(|&j| (0..entry_count).any(|i| m[i][j]))
        .map(construct)
        .collect()
}

fn usage_graph() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize)>)> {
    (2usize..=200).prop_flat_map(|n| {
        (
            Just(n),
            1..=n.min(5),
            prop::collection::vec((0..n, 0..n), 0..n * 2),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reachability_matches_transitive_closure((n, entries, edges) in usage_graph()) {
        let got = usage_model(n, entries, &edges).reachable();
        prop_assert_eq!(got, closure_reachable(n, entries, &edges));
    }

    #[test]
    fn more_edges_reach_more((n, entries, edges) in usage_graph(), extra in prop::collection::vec((0usize..200, 0usize..200), 1..20)) {
        let before = usage_model(n, entries, &edges).reachable();
        let mut more = edges.clone();
        more.extend(extra.into_iter().map(|(a, b)| (a % n, b % n)));
        let after = usage_model(n, entries, &more).reachable();
        prop_assert!(before.is_subset(&after));
    }
}

fn ecosystem_params() -> impl Strategy<Value = EcosystemParams> {
    (any::<u64>(), 1usize..10, 1usize..6, 0usize..4).prop_map(|(seed, package_count, max_versions, deps)| EcosystemParams {
        seed,
        package_count,
        max_versions,
        max_deps_per_release: deps,
        ..EcosystemParams::default()
    })
}

fn single_dep_root(release: &laglift::registry::Release) -> RootManifest {
    RootManifest::new(
        "org.check:root",
        vec![DependencyDecl::new(release.package.clone(), release.version.clone(), Scope::Compile)],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closure_size_counts_resolved_packages(params in ecosystem_params()) {
        let eco = gen_ecosystem(&params).unwrap();
        for r in eco.registry.releases() {
            let g = resolve_graph(&single_dep_root(r), &eco.registry).unwrap();
            prop_assert_eq!(eco.registry.closure_size(&r.package, &r.version).unwrap(), g.node_count() - 1);
        }
    }

    #[test]
    fn registry_ignores_release_order(params in ecosystem_params(), shuffle in any::<u64>()) {
        let eco = gen_ecosystem(&params).unwrap();
        let mut releases: Vec<_> = eco.registry.releases().cloned().collect();
        releases.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let again = RegistryIndex::from_releases(releases).unwrap();
        prop_assert_eq!(again.to_json(), eco.registry.to_json());
    }

    #[test]
    fn repeating_an_update_changes_nothing(params in ecosystem_params(), pick in any::<prop::sample::Index>()) {
        let eco = gen_ecosystem(&params).unwrap();
        let g = resolve_graph(&eco.manifest, &eco.registry).unwrap();
        let nodes: Vec<_> = g.nodes().keys().cloned().collect();
        prop_assume!(!nodes.is_empty());
        let p = pick.get(&nodes);
        let latest = eco.registry.latest_stable(p).unwrap().version.clone();
        let once = update_graph(&g, p, &latest, &eco.registry).unwrap();
        if once.contains(p) {
            let twice = update_graph(&once, p, &latest, &eco.registry).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}
