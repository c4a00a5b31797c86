mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use sosg_core::builder::{build, IdentifierPolicy};
use sosg_core::graph::VertexId;
use sosg_core::query::{EntitySelector, PathQuery, QueryEngine, Target};

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn find_paths_matches_exhaustive_oracle(seed in any::<u64>()) {
        let g = random_graph(seed);
        if let Some(case) = random_path_case(&g, seed) {
            let got = QueryEngine::new(&g).find_paths(&case.query).unwrap();
            let want = oracle_for_case(&g, &case);
            prop_assert_eq!(&got.paths, &want);
            prop_assert_eq!(got.stats.truncated, oracle_for_case(&g, &PathCase { query: case.query.clone().with_limit(usize::MAX), ..case }).len() > got.paths.len());
        }
    }

    #[test]
    fn results_are_sound(seed in any::<u64>()) {
        let g = random_graph(seed);
        let Some(case) = random_path_case(&g, seed) else { return Ok(()) };
        let got = QueryEngine::new(&g).find_paths(&case.query).unwrap();
        let adj = spatial_adjacency(&g);
        for p in &got.paths {
            prop_assert_eq!(p[0], case.start);
            prop_assert!(case.targets.contains(p.last().unwrap()));
            prop_assert!(p.len() % 2 == 1 && p.len() / 2 <= case.query.max_depth);
            prop_assert_eq!(p.iter().collect::<BTreeSet<_>>().len(), p.len());
            for w in p.windows(2) {
                prop_assert!(adj[&w[0]].contains(&w[1]));
            }
            for (hop, b) in p.iter().skip(1).step_by(2).enumerate() {
                let v = g.vertex(*b).unwrap();
                prop_assert!(!v.is_entity());
                if let Some(set) = case.constraints.as_ref().and_then(|c| c.get(hop)) {
                    prop_assert!(set.contains(&v.dtype));
                }
                if let Some(t) = case.query.at_time {
                    prop_assert!(v.timestamp.unwrap() <= t);
                }
            }
        }
        prop_assert!(got.paths.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn limit_gives_a_prefix(seed in any::<u64>(), limit in 1usize..10) {
        let g = random_graph(seed);
        let Some(case) = random_path_case(&g, seed) else { return Ok(()) };
        let engine = QueryEngine::new(&g);
        let all = engine.find_paths(&case.query.clone().with_limit(usize::MAX)).unwrap().paths;
        let some = engine.find_paths(&case.query.clone().with_limit(limit)).unwrap().paths;
        prop_assert_eq!(&some[..], &all[..limit.min(all.len())]);
    }

    #[test]
    fn deeper_search_keeps_reachable_targets(seed in any::<u64>()) {
        let g = random_graph(seed);
        let Some(case) = random_path_case(&g, seed) else { return Ok(()) };
        let engine = QueryEngine::new(&g);
        let base = case.query.clone().with_limit(usize::MAX);
        let d = base.max_depth;
        let shallow = engine.find_paths(&base.clone().with_max_depth(d)).unwrap();
        let deep = engine.find_paths(&base.with_max_depth(d + 1)).unwrap();
        let shallow_ends: BTreeSet<_> = shallow.endpoints().into_iter().collect();
        let deep_ends: BTreeSet<_> = deep.endpoints().into_iter().collect();
        prop_assert!(shallow_ends.is_subset(&deep_ends));
        // Targets already reached keep the same shortest paths.
        let keep = |ps: &[Vec<VertexId>]| -> Vec<Vec<VertexId>> {
            ps.iter().filter(|p| shallow_ends.contains(p.last().unwrap())).cloned().collect()
        };
        prop_assert_eq!(keep(&shallow.paths), keep(&deep.paths));
    }

    #[test]
    fn earlier_cutoff_never_adds_targets(seed in any::<u64>(), t1 in 0i64..50, t2 in 0i64..50) {
        let g = random_graph(seed);
        let Some(case) = random_path_case(&g, seed) else { return Ok(()) };
        let engine = QueryEngine::new(&g);
        let (lo, hi) = (t1.min(t2) * 1_000_000, t1.max(t2) * 1_000_000);
        let base = case.query.clone().with_limit(usize::MAX);
        let early: BTreeSet<_> = engine.find_paths(&base.clone().at(Some(lo))).unwrap().endpoints().into_iter().collect();
        let late: BTreeSet<_> = engine.find_paths(&base.at(Some(hi))).unwrap().endpoints().into_iter().collect();
        prop_assert!(early.is_subset(&late));
    }
}

#[test]
fn fig1_path_from_vm_to_address() {
    let (g, _) = build(&fig1_records(), &IdentifierPolicy::only(["instance", "ip"])).unwrap();
    let engine = QueryEngine::new(&g);
    let q = PathQuery::new(
        EntitySelector::new("instance", "xxx-xx1"),
        Target::Entity(EntitySelector::new("ip", "10.1.0.12")),
    );
    let got = engine.find_paths(&q).unwrap();
    // One hop through either the second log line or the second database row.
    assert_eq!(got.paths.len(), 2);
    assert!(got.paths.iter().all(|p| p.len() == 3));

    let only_db = q.clone().with_constraints(["DB"]);
    let got = engine.find_paths(&only_db).unwrap();
    assert_eq!(got.paths.len(), 1);
    assert_eq!(g.vertex(got.paths[0][1]).unwrap().dtype, "DB");
}

#[test]
fn latest_state_respects_cutoff() {
    let (g, _) = build(&fig1_records(), &IdentifierPolicy::only(["instance", "ip"])).unwrap();
    let engine = QueryEngine::new(&g);
    let sel = EntitySelector::new("instance", "xxx-xx1");
    let last = engine.latest_state(&sel, "DB", None).unwrap().unwrap();
    assert_eq!(last.props["state"], "active");
    let earlier = engine.latest_state(&sel, "DB", Some(FIG1_START + 3_000_000)).unwrap().unwrap();
    assert_eq!(earlier.props["state"], "building");
    assert!(engine.latest_state(&sel, "DB", Some(FIG1_START)).unwrap().is_none());
}

#[test]
fn unknown_entity_is_an_error() {
    let (g, _) = build(&fig1_records(), &IdentifierPolicy::only(["instance", "ip"])).unwrap();
    let q = PathQuery::new(EntitySelector::new("instance", "nope"), Target::Dtype("ip".into()));
    assert!(QueryEngine::new(&g).find_paths(&q).is_err());
}

#[test]
fn oracle_cases_are_not_vacuous() {
    let (mut nonempty, mut multi_hop) = (0, 0);
    for seed in 0..200 {
        let g = random_graph(seed);
        let Some(case) = random_path_case(&g, seed) else { continue };
        let want = oracle_for_case(&g, &case);
        nonempty += usize::from(!want.is_empty());
        multi_hop += usize::from(want.iter().any(|p| p.len() > 3));
    }
    assert!(nonempty > 90, "{nonempty}");
    assert!(multi_hop > 60, "{multi_hop}");
}

