//! Independent reference implementations and fixtures shared by the
//! integration and acceptance tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sosg_core::anomaly::TripletMultiset;
use sosg_core::builder::{build, IdentifierPolicy};
use sosg_core::graph::{EdgeKind, StateGraph, VertexId};
use sosg_core::ingest::{Origin, Record, SourceType};
use sosg_core::query::{EntitySelector, PathQuery, Target};
use sosg_core::time::Micros;

pub const FIG1_START: Micros = 1_700_000_000_000_000;

/// The four records of the Fig. 1 slice: two log events and two
/// database rows mentioning a VM and an address.
pub fn fig1_records() -> Vec<Record> {
    let rec = |source, dt: i64, line: u64, props: &[(&str, &str)]| Record {
        source,
        timestamp: FIG1_START + dt,
        props: props.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        origin: Origin {
            file: "fig1".into(),
            line,
        },
    };
    vec![
        rec(
            SourceType::Log,
            1_000_000,
            1,
            &[("severity", "INFO"), ("message", "scheduling instance xxx-xx1 on compute node")],
        ),
        rec(
            SourceType::Log,
            3_000_000,
            2,
            &[("severity", "INFO"), ("message", "instance xxx-xx1 acquired ip 10.1.0.12")],
        ),
        rec(SourceType::Db, 2_000_000, 3, &[("instance", "xxx-xx1"), ("state", "building")]),
        rec(
            SourceType::Db,
            4_000_000,
            4,
            &[("instance", "xxx-xx1"), ("ip", "10.1.0.12"), ("state", "active")],
        ),
    ]
}

/// Spatial adjacency rebuilt from the raw edge list.
pub fn spatial_adjacency(g: &StateGraph) -> HashMap<VertexId, BTreeSet<VertexId>> {
    let mut adj: HashMap<VertexId, BTreeSet<VertexId>> = HashMap::new();
    for e in g.edges() {
        if e.kind == EdgeKind::Spatial {
            adj.entry(e.src).or_default().insert(e.dst);
            adj.entry(e.dst).or_default().insert(e.src);
        }
    }
    adj
}

/// Temporal edges expected from the spatial structure: for every entity and
/// every dtype of its neighbors, consecutive pairs in (timestamp, id) order.
pub fn expected_temporal(g: &StateGraph) -> BTreeSet<(VertexId, VertexId, VertexId)> {
    let adj = spatial_adjacency(g);
    let mut out = BTreeSet::new();
    for v in g.vertices().iter().filter(|v| v.is_entity()) {
        let mut by_dtype: BTreeMap<&str, Vec<(Micros, VertexId)>> = BTreeMap::new();
        for n in adj.get(&v.id).into_iter().flatten() {
            let nv = g.vertex(*n).unwrap();
            by_dtype.entry(&nv.dtype).or_default().push((nv.timestamp.unwrap(), nv.id));
        }
        for (_, mut items) in by_dtype {
            items.sort();
            for w in items.windows(2) {
                out.insert((w[0].1, w[1].1, v.id));
            }
        }
    }
    out
}

pub fn actual_temporal(g: &StateGraph) -> BTreeSet<(VertexId, VertexId, VertexId)> {
    g.edges()
        .iter()
        .filter(|e| e.kind == EdgeKind::Temporal)
        .map(|e| (e.src, e.dst, e.via().expect("temporal edge names its entity")))
        .collect()
}

/// Path query parameters for the exhaustive oracle.
pub struct OracleQuery<'a> {
    pub start: VertexId,
    pub targets: &'a BTreeSet<VertexId>,
    pub max_depth: usize,
    pub constraints: Option<&'a [BTreeSet<String>]>,
    pub at_time: Option<Micros>,
    pub limit: usize,
}

/// Every simple alternating entity/bridge path of at most `max_depth` hops;
/// for each target keeps the ones of minimal length. Sorted, truncated.
pub fn oracle_paths(g: &StateGraph, q: &OracleQuery<'_>) -> Vec<Vec<VertexId>> {
    let adj = spatial_adjacency(g);
    let mut found: BTreeMap<VertexId, (usize, Vec<Vec<VertexId>>)> = BTreeMap::new();
    let mut path = vec![q.start];

    fn allowed(g: &StateGraph, q: &OracleQuery<'_>, b: VertexId, hop: usize) -> bool {
        let v = g.vertex(b).unwrap();
        if v.is_entity() {
            return false;
        }
        if let Some(t) = q.at_time {
            if v.timestamp.map_or(true, |ts| ts > t) {
                return false;
            }
        }
        match q.constraints.and_then(|c| c.get(hop)) {
            Some(set) => set.contains(&v.dtype),
            None => true,
        }
    }

    fn record(found: &mut BTreeMap<VertexId, (usize, Vec<Vec<VertexId>>)>, path: &[VertexId]) {
        let hops = path.len() / 2;
        let entry = found.entry(*path.last().unwrap()).or_insert((usize::MAX, Vec::new()));
        if hops < entry.0 {
            *entry = (hops, vec![path.to_vec()]);
        } else if hops == entry.0 {
            entry.1.push(path.to_vec());
        }
    }

    fn walk(
        g: &StateGraph,
        q: &OracleQuery<'_>,
        adj: &HashMap<VertexId, BTreeSet<VertexId>>,
        path: &mut Vec<VertexId>,
        found: &mut BTreeMap<VertexId, (usize, Vec<Vec<VertexId>>)>,
    ) {
        let e = *path.last().unwrap();
        if q.targets.contains(&e) {
            record(found, path);
        }
        let hop = path.len() / 2;
        if hop == q.max_depth {
            return;
        }
        for &b in adj.get(&e).into_iter().flatten() {
            if path.contains(&b) || !allowed(g, q, b, hop) {
                continue;
            }
            for &n in adj.get(&b).into_iter().flatten() {
                if path.contains(&n) || !g.vertex(n).unwrap().is_entity() {
                    continue;
                }
                path.push(b);
                path.push(n);
                walk(g, q, adj, path, found);
                path.truncate(path.len() - 2);
            }
        }
    }

    walk(g, q, &adj, &mut path, &mut found);
    let mut out: Vec<Vec<VertexId>> = found.into_values().flat_map(|(_, ps)| ps).collect();
    out.sort();
    out.dedup();
    out.truncate(q.limit);
    out
}

/// Random records whose identifier keys are `a`, `b` and `c`.
pub fn random_records(rng: &mut ChaCha8Rng, n: usize, pool: usize) -> Vec<Record> {
    let keys = ["a", "b", "c"];
    (0..n)
        .map(|i| {
            let source = SourceType::ALL[rng.gen_range(0..SourceType::ALL.len())];
            let width = [1, 2, 2, 3][rng.gen_range(0..4)];
            let props = keys
                .choose_multiple(rng, width)
                .map(|k| (k.to_string(), format!("{k}{}", rng.gen_range(0..pool))))
                .collect();
            Record {
                source,
                timestamp: rng.gen_range(0..50) * 1_000_000,
                props,
                origin: Origin {
                    file: "random".into(),
                    line: i as u64,
                },
            }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(Σ min, Σ max)` computed over an explicit union of keys.
pub fn oracle_ratio(a: &TripletMultiset, b: &TripletMultiset) -> (u64, u64) {
    let keys: BTreeSet<_> = a.counts.keys().chain(b.counts.keys()).collect();
    keys.into_iter().fold((0, 0), |(n, d), k| {
        let (x, y) = (a.get(k), b.get(k));
        (n + x.min(y), d + x.max(y))
    })
}

pub fn oracle_distance(a: &TripletMultiset, b: &TripletMultiset) -> f64 {
    match oracle_ratio(a, b) {
        (_, 0) => 0.0,
        (n, d) => 1.0 - n as f64 / d as f64,
    }
}

/// Brute-force definition: members with fewer than `k` others within `r`.
pub fn oracle_flags(features: &[TripletMultiset], k: usize, r: f64) -> Vec<usize> {
    (0..features.len())
        .filter(|&i| {
            let near = (0..features.len())
                .filter(|&j| j != i && oracle_distance(&features[i], &features[j]) <= r)
                .count();
            near < k
        })
        .collect()
}

/// A population of multisets drawn from a few prototypes with noise.
pub fn random_population(rng: &mut ChaCha8Rng, n: usize) -> Vec<TripletMultiset> {
    let protos: Vec<TripletMultiset> = (0..rng.gen_range(1..5)).map(|_| random_multiset(rng, 6)).collect();
    (0..n)
        .map(|_| {
            let mut m = protos[rng.gen_range(0..protos.len())].clone();
            if rng.gen_bool(0.3) {
                let extra = random_multiset(rng, 2);
                for (c, k) in extra.counts {
                    m.add(c, k);
                }
            }
            m
        })
        .collect()
}

pub fn random_multiset(rng: &mut ChaCha8Rng, codes: usize) -> TripletMultiset {
    use sosg_core::anomaly::{Signature, TripletCode};
    use sosg_core::graph::VertexCategory;
    let dtypes = ["uuid", "host", "DB", "Ovs", "Libvirt", "*"];
    let mut m = TripletMultiset::default();
    for _ in 0..rng.gen_range(0..=codes) {
        let sig = |rng: &mut ChaCha8Rng| Signature {
            cat: [VertexCategory::Entity, VertexCategory::State, VertexCategory::Event][rng.gen_range(0..3)],
            dtype: dtypes[rng.gen_range(0..dtypes.len())].to_string(),
        };
        let code = TripletCode {
            depth: rng.gen_range(0..3),
            src: sig(rng),
            kind: if rng.gen_bool(0.7) { EdgeKind::Spatial } else { EdgeKind::Temporal },
            dst: sig(rng),
        };
        m.add(code, rng.gen_range(1..6));
    }
    m
}

/// Generates a corpus, writes it to `dir`, ingests it with the corpus's own
/// source mapping and builds the graph under the default policy.
pub fn pipeline(
    spec: &sosg_core::synth::FleetSpec,
    seed: u64,
    dir: &std::path::Path,
) -> (sosg_core::synth::Corpus, Vec<Record>, StateGraph) {
    let corpus = sosg_core::synth::generate(spec, seed).expect("corpus generates");
    corpus.write_to(dir).expect("corpus writes");
    let (records, _) =
        sosg_core::ingest::ingest_corpus(dir, &sosg_core::synth::source_entries()).expect("corpus ingests");
    let (graph, _) =
        sosg_core::builder::build(&records, &sosg_core::builder::IdentifierPolicy::default()).expect("graph builds");
    (corpus, records, graph)
}

/// A small fleet that still clears the default identifier thresholds.
pub fn small_fleet() -> sosg_core::synth::FleetSpec {
    sosg_core::synth::FleetSpec {
        n_hosts: 10,
        n_vms: 60,
        n_subnets: 4,
        duration_hours: 1.0,
        period_scale: 10.0,
        ..Default::default()
    }
}

/// The evaluation fleet: 20 hosts, 200 VMs, two simulated hours with
/// snapshot periods stretched tenfold.
pub fn eval_fleet() -> sosg_core::synth::FleetSpec {
    sosg_core::synth::FleetSpec {
        period_scale: 10.0,
        ..Default::default()
    }
}

/// A graph over random records with identifier keys `a`, `b`, `c`.
pub fn random_graph(seed: u64) -> StateGraph {
    let mut r = rng(seed);
    let n = r.gen_range(20..150);
    let pool = r.gen_range(6..25);
    build(&random_records(&mut r, n, pool), &IdentifierPolicy::only(["a", "b", "c"]))
        .unwrap()
        .0
}

pub struct PathCase {
    pub query: PathQuery,
    pub start: VertexId,
    pub targets: BTreeSet<VertexId>,
    pub constraints: Option<Vec<BTreeSet<String>>>,
}

/// A random path query with its oracle inputs; `None` when the graph has
/// fewer than two entities.
pub fn random_path_case(g: &StateGraph, seed: u64) -> Option<PathCase> {
    let mut r = rng(seed ^ 0x9e37);
    let entities: Vec<_> = g.vertices().iter().filter(|v| v.is_entity()).collect();
    if entities.len() < 2 {
        return None;
    }
    let start = entities[r.gen_range(0..entities.len())];
    let from = EntitySelector::new(&start.dtype, start.entity_value().unwrap());
    let (to, targets) = if r.gen_bool(0.5) {
        let t = entities[r.gen_range(0..entities.len())];
        (
            Target::Entity(EntitySelector::new(&t.dtype, t.entity_value().unwrap())),
            BTreeSet::from([t.id]),
        )
    } else {
        let key = ["a", "b", "c"][r.gen_range(0..3)];
        let ids = g
            .entities_of(key)
            .into_iter()
            .map(|v| v.id)
            .filter(|id| *id != start.id)
            .collect();
        (Target::Dtype(key.to_string()), ids)
    };
    let mut query = PathQuery::new(from, to)
        .with_max_depth(r.gen_range(1..=4))
        .with_limit(if r.gen_bool(0.3) { r.gen_range(1..20) } else { usize::MAX });
    let mut constraints = None;
    if r.gen_bool(0.4) {
        let hops: Vec<String> = (0..r.gen_range(1..=3))
            .map(|_| {
                let mut set: Vec<&str> = SourceType::ALL
                    .iter()
                    .filter(|_| r.gen_bool(0.5))
                    .map(|s| s.as_str())
                    .collect();
                if set.is_empty() {
                    set.push("DB");
                }
                set.join("|")
            })
            .collect();
        query = query.with_constraints(&hops);
        constraints = query.type_constraints.clone();
    }
    if r.gen_bool(0.3) {
        query = query.at(Some(r.gen_range(0..50) * 1_000_000));
    }
    Some(PathCase {
        query,
        start: start.id,
        targets,
        constraints,
    })
}

pub fn oracle_for_case(g: &StateGraph, c: &PathCase) -> Vec<Vec<VertexId>> {
    oracle_paths(
        g,
        &OracleQuery {
            start: c.start,
            targets: &c.targets,
            max_depth: c.query.max_depth,
            constraints: c.constraints.as_deref(),
            at_time: c.query.at_time,
            limit: c.query.limit,
        },
    )
}
