mod common;

use std::collections::{BTreeMap, BTreeSet};

use sosg_core::anomaly::{analyze, extract_subgraphs, featurize, DetectionConfig};
use sosg_core::graph::VertexId;
use sosg_core::synth::{FaultKind, FaultRequest, FleetSpec, Lifecycle};

use common::*;

fn values<'a>(vs: impl IntoIterator<Item = &'a sosg_core::graph::Vertex>) -> BTreeSet<String> {
    vs.into_iter().map(|v| v.entity_value().unwrap().to_string()).collect()
}

#[test]
fn fault_free_fleets_flag_at_most_two_percent() {
    for seed in 1..=10 {
        let dir = tempfile::tempdir().unwrap();
        let (corpus, _, graph) = pipeline(&eval_fleet(), seed, dir.path());
        let report = analyze(&graph, &DetectionConfig::default()).unwrap();
        assert_eq!(report.population, corpus.truth.vms.len());
        assert!(
            report.flagged.len() as f64 <= 0.02 * report.population as f64,
            "seed {seed}: {:?}",
            report.flagged
        );
    }
}

#[test]
fn faulted_vms_are_flagged_and_unlike_the_mode() {
    let spec = FleetSpec {
        faults: [FaultKind::OrphanOvsPorts, FaultKind::DbPhysicalMismatch, FaultKind::FailedMigration]
            .into_iter()
            .map(|kind| FaultRequest { kind, target_vm: None })
            .collect(),
        ..eval_fleet()
    };
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _, graph) = pipeline(&spec, 3, dir.path());
    let config = DetectionConfig::default();
    let report = analyze(&graph, &config).unwrap();
    let flagged: BTreeSet<&String> = report.flagged.iter().collect();
    for vm in &corpus.truth.expected_anomalies {
        assert!(flagged.contains(vm), "{vm} missed; flagged {flagged:?}");
    }

    let roots: Vec<VertexId> = graph.entities_of("uuid").into_iter().map(|v| v.id).collect();
    let subs = extract_subgraphs(&graph, &roots, config.max_bfs_depth).unwrap();
    let mut tally: BTreeMap<_, usize> = BTreeMap::new();
    let mut by_vm = BTreeMap::new();
    for s in &subs {
        let f = featurize(&graph, s, true);
        *tally.entry(f.clone()).or_default() += 1;
        by_vm.insert(graph.vertex(s.root).unwrap().entity_value().unwrap().to_string(), f);
    }
    let modal = tally.iter().max_by_key(|(_, n)| **n).unwrap().0;
    for vm in &corpus.truth.expected_anomalies {
        assert_ne!(&by_vm[vm], modal, "{vm}");
    }
}

#[test]
fn graph_recovers_topology() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, records, graph) = pipeline(&eval_fleet(), 2, dir.path());
    graph.check_invariants().unwrap();
    let truth = &corpus.truth;
    let counts = graph.counts();
    assert_eq!(counts.states + counts.events, records.len());

    // Every stated relation becomes two entities sharing a bridge.
    let adj = spatial_adjacency(&graph);
    let mut missing: BTreeMap<&str, usize> = BTreeMap::new();
    for rel in &truth.relations {
        let ends = |v: &str| -> BTreeSet<VertexId> { graph.entities_with_value(v).iter().map(|e| e.id).collect() };
        let (a, b) = (ends(&rel.a.1), ends(&rel.b.1));
        let linked = a.iter().any(|x| {
            adj.get(x)
                .into_iter()
                .flatten()
                .any(|bridge| adj[bridge].iter().any(|y| b.contains(y)))
        });
        if !linked {
            *missing.entry(rel.kind.as_str()).or_default() += 1;
        }
    }
    assert!(missing.is_empty(), "{missing:?}");

    let engine = sosg_core::query::QueryEngine::new(&graph);
    for host in truth.hosts.iter().take(5) {
        let mut want: BTreeSet<String> = truth.vms_with_blocks_on(host);
        want.extend(truth.vms.iter().filter(|v| &v.host == host).map(|v| v.uuid.clone()));
        assert_eq!(values(engine.affected_vms(host, None).unwrap()), want, "{host}");
    }
    for vm in truth.vms.iter().filter(|v| v.lifecycle == Lifecycle::LongRunning).take(5) {
        let want: BTreeSet<String> = vm.images.iter().flat_map(|i| &i.blocks).map(|b| b.block.clone()).collect();
        assert_eq!(values(engine.cephfiles_for_vm(&vm.uuid, None).unwrap()), want, "{}", vm.uuid);
    }
    for subnet in &truth.subnets {
        let want: BTreeSet<String> = truth.vms.iter().filter(|v| &v.subnet == subnet).map(|v| v.uuid.clone()).collect();
        assert_eq!(values(engine.vms_in_subnet(subnet, None).unwrap()), want, "{subnet}");
    }
}
