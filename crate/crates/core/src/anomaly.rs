//! Subgraph-distance anomaly detection over VM dependency subgraphs.
//!
//! Each VM entity roots a BFS over spatial edges. All roots advance in
//! synchronized rounds; a vertex reached by more than one root becomes a
//! terminal shared vertex, so one VM's subgraph never absorbs another's
//! resources. Subgraphs are featurized as multisets of triplet codes
//! (source depth, endpoint signatures, edge kind) and compared with the
//! generalized Jaccard distance. A VM with fewer than `k` other VMs within
//! distance `r` is flagged.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeKind, StateGraph, VertexCategory, VertexId};

#[derive(Debug, Error, PartialEq)]
pub enum AnomalyError {
    #[error("root {0} is not an entity vertex of this graph")]
    BadRoot(VertexId),
    #[error("no entities with identifier key `{0}`")]
    NoRoots(String),
    #[error("need at least 2 subgraphs to compare, found {0}")]
    TooFewRoots(usize),
    #[error("invalid detection parameters: {0}")]
    Params(String),
}

/// Per-VM dependency subgraph. Depths are BFS rounds from the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmSubgraph {
    pub root: VertexId,
    pub members: BTreeMap<VertexId, u32>,
    pub shared_frontier: BTreeMap<VertexId, u32>,
    /// Induced edge indices into the graph's edge list.
    pub edges: Vec<usize>,
}

impl VmSubgraph {
    pub fn depth_of(&self, id: VertexId) -> Option<u32> {
        self.members.get(&id).or_else(|| self.shared_frontier.get(&id)).copied()
    }
}

#[derive(Debug, Clone, Copy)]
enum Claim {
    Owned(usize),
    Shared,
}

/// Multi-root BFS with collaborative pruning. Roots are deduplicated.
pub fn extract_subgraphs(
    graph: &StateGraph,
    roots: &[VertexId],
    max_bfs_depth: u32,
) -> Result<Vec<VmSubgraph>, AnomalyError> {
    let mut root_idx: Vec<usize> = Vec::with_capacity(roots.len());
    for &r in roots {
        match graph.idx(r) {
            Some(i) if graph.at(i).is_entity() => root_idx.push(i),
            _ => return Err(AnomalyError::BadRoot(r)),
        }
    }
    root_idx.sort_unstable_by_key(|&i| graph.at(i).id);
    root_idx.dedup();

    let n = graph.len();
    let mut claims: Vec<Option<Claim>> = vec![None; n];
    let mut members: Vec<Vec<(usize, u32)>> = vec![Vec::new(); root_idx.len()];
    let mut shared: Vec<BTreeMap<usize, u32>> = vec![BTreeMap::new(); root_idx.len()];
    let mut frontiers: Vec<Vec<usize>> = Vec::with_capacity(root_idx.len());
    for (r, &i) in root_idx.iter().enumerate() {
        claims[i] = Some(Claim::Owned(r));
        members[r].push((i, 0));
        frontiers.push(vec![i]);
    }

    for depth in 1..=max_bfs_depth {
        let arrivals: Vec<Vec<usize>> = frontiers
            .par_iter()
            .map(|f| {
                let mut out: Vec<usize> = f.iter().flat_map(|&v| graph.spatial_neighbors(v)).collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        let mut by_vertex: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (r, arr) in arrivals.into_iter().enumerate() {
            for v in arr {
                by_vertex.entry(v).or_default().push(r);
            }
        }
        let mut next: Vec<Vec<usize>> = vec![Vec::new(); root_idx.len()];
        for (v, arrivers) in by_vertex {
            match claims[v] {
                Some(Claim::Owned(owner)) => {
                    for a in arrivers.into_iter().filter(|&a| a != owner) {
                        shared[a].entry(v).or_insert(depth);
                    }
                }
                Some(Claim::Shared) => {
                    for a in arrivers {
                        shared[a].entry(v).or_insert(depth);
                    }
                }
                None if arrivers.len() == 1 => {
                    let a = arrivers[0];
                    claims[v] = Some(Claim::Owned(a));
                    members[a].push((v, depth));
                    next[a].push(v);
                }
                None => {
                    claims[v] = Some(Claim::Shared);
                    for a in arrivers {
                        shared[a].insert(v, depth);
                    }
                }
            }
        }
        frontiers = next;
        if frontiers.iter().all(Vec::is_empty) {
            break;
        }
    }

    let out = root_idx
        .par_iter()
        .enumerate()
        .map(|(r, &ri)| {
            let mem: BTreeMap<VertexId, u32> = members[r].iter().map(|&(i, d)| (graph.at(i).id, d)).collect();
            let sh: BTreeMap<VertexId, u32> = shared[r].iter().map(|(&i, &d)| (graph.at(i).id, d)).collect();
            let edges = induced(graph, &mem, &sh);
            VmSubgraph {
                root: graph.at(ri).id,
                members: mem,
                shared_frontier: sh,
                edges,
            }
        })
        .collect();
    Ok(out)
}

/// Edges among members and shared vertices with at least one member
/// endpoint. A temporal edge counts only when the entity it chains is a
/// member.
fn induced(graph: &StateGraph, members: &BTreeMap<VertexId, u32>, shared: &BTreeMap<VertexId, u32>) -> Vec<usize> {
    let inside = |id: &VertexId| members.contains_key(id) || shared.contains_key(id);
    let mut out: Vec<usize> = Vec::new();
    for id in members.keys() {
        let Some(i) = graph.idx(*id) else { continue };
        for &e in graph.out_edges(i).iter().chain(graph.in_edges(i)) {
            let edge = graph.edge(e);
            if !(inside(&edge.src) && inside(&edge.dst)) {
                continue;
            }
            if edge.kind == EdgeKind::Temporal && !edge.via().is_some_and(|v| members.contains_key(&v)) {
                continue;
            }
            out.push(e);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// `(category, dtype)` of a vertex, with event dtypes optionally collapsed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub cat: VertexCategory,
    pub dtype: String,
}

pub const COLLAPSED_EVENT_DTYPE: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TripletCode {
    pub depth: u32,
    pub src: Signature,
    pub kind: EdgeKind,
    pub dst: Signature,
}

impl std::fmt::Display for TripletCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}/{}-{}->{}/{}",
            self.depth,
            self.src.cat.code(),
            self.src.dtype,
            self.kind,
            self.dst.cat.code(),
            self.dst.dtype
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripletMultiset {
    pub counts: BTreeMap<TripletCode, u64>,
}

impl TripletMultiset {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn add(&mut self, code: TripletCode, n: u64) {
        if n > 0 {
            *self.counts.entry(code).or_default() += n;
        }
    }

    pub fn get(&self, code: &TripletCode) -> u64 {
        self.counts.get(code).copied().unwrap_or(0)
    }
}

impl Serialize for TripletMultiset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(self.counts.iter().map(|(c, n)| (c.to_string(), n)))
    }
}

/// One code per induced edge, at the BFS depth of the edge's source.
pub fn featurize(graph: &StateGraph, sub: &VmSubgraph, collapse_events: bool) -> TripletMultiset {
    let sig = |id: VertexId| {
        let v = graph.vertex(id).expect("subgraph vertex exists");
        let dtype = if collapse_events && v.category == VertexCategory::Event {
            COLLAPSED_EVENT_DTYPE.to_string()
        } else {
            v.dtype.clone()
        };
        Signature { cat: v.category, dtype }
    };
    let mut m = TripletMultiset::default();
    for &e in &sub.edges {
        let edge = graph.edge(e);
        let code = TripletCode {
            depth: sub.depth_of(edge.src).unwrap_or(0),
            src: sig(edge.src),
            kind: edge.kind,
            dst: sig(edge.dst),
        };
        m.add(code, 1);
    }
    m
}

/// `(Σ min, Σ max)` over the union of codes.
pub fn jaccard_ratio(a: &TripletMultiset, b: &TripletMultiset) -> (u64, u64) {
    let (mut num, mut den) = (0u64, 0u64);
    let mut ia = a.counts.iter().peekable();
    let mut ib = b.counts.iter().peekable();
    loop {
        match (ia.peek(), ib.peek()) {
            (Some((ca, &na)), Some((cb, &nb))) => match ca.cmp(cb) {
                std::cmp::Ordering::Less => {
                    den += na;
                    ia.next();
                }
                std::cmp::Ordering::Greater => {
                    den += nb;
                    ib.next();
                }
                std::cmp::Ordering::Equal => {
                    num += na.min(nb);
                    den += na.max(nb);
                    ia.next();
                    ib.next();
                }
            },
            (Some((_, &na)), None) => {
                den += na;
                ia.next();
            }
            (None, Some((_, &nb))) => {
                den += nb;
                ib.next();
            }
            (None, None) => break,
        }
    }
    (num, den)
}

/// `1 - Σ min / Σ max`; 0 for two empty multisets.
pub fn generalized_jaccard(a: &TripletMultiset, b: &TripletMultiset) -> f64 {
    let (num, den) = jaccard_ratio(a, b);
    if den == 0 {
        0.0
    } else {
        1.0 - num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub k: usize,
    pub r: f64,
    pub max_bfs_depth: u32,
}

impl DetectionParams {
    pub fn validate(&self) -> Result<(), AnomalyError> {
        if self.k == 0 {
            return Err(AnomalyError::Params("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(AnomalyError::Params(format!("r = {} is outside [0, 1]", self.r)));
        }
        if self.max_bfs_depth == 0 {
            return Err(AnomalyError::Params("max_bfs_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// Detection settings; unset `k` and `r` are derived from the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub root_key: String,
    pub k: Option<usize>,
    pub r: Option<f64>,
    /// Percentile of the pairwise distances used when `r` is unset.
    pub r_percentile: f64,
    /// Fraction of the population used for `k` when unset, floored at 2.
    pub k_fraction: f64,
    pub max_bfs_depth: u32,
    pub collapse_events: bool,
    pub top_neighbors: usize,
    pub evidence_codes: usize,
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<(), AnomalyError> {
        let err = |m: String| Err(AnomalyError::Params(m));
        if self.k == Some(0) {
            return err("k must be at least 1".into());
        }
        if let Some(r) = self.r {
            if !(0.0..=1.0).contains(&r) {
                return err(format!("r = {r} is outside [0, 1]"));
            }
        }
        if !(0.0..=100.0).contains(&self.r_percentile) {
            return err(format!("r_percentile = {} is outside [0, 100]", self.r_percentile));
        }
        if !(self.k_fraction > 0.0 && self.k_fraction <= 1.0) {
            return err(format!("k_fraction = {} is outside (0, 1]", self.k_fraction));
        }
        if self.max_bfs_depth == 0 {
            return err("max_bfs_depth must be at least 1".into());
        }
        Ok(())
    }
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            root_key: "uuid".into(),
            k: None,
            r: None,
            r_percentile: 10.0,
            k_fraction: 0.02,
            max_bfs_depth: 6,
            collapse_events: true,
            top_neighbors: 5,
            evidence_codes: 5,
        }
    }
}

/// Nearest-rank percentile of the pairwise distances among `features`.
pub fn pairwise_percentile(features: &[TripletMultiset], pct: f64) -> f64 {
    let groups = Groups::new(features);
    let mut weighted = groups.pair_distances();
    weighted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: u64 = weighted.iter().map(|w| w.1).sum();
    if total == 0 {
        return 0.0;
    }
    let rank = ((pct / 100.0 * total as f64).ceil() as u64).clamp(1, total);
    let mut seen = 0;
    for (d, w) in weighted {
        seen += w;
        if seen >= rank {
            return d;
        }
    }
    0.0
}

pub fn default_k(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).max(2)
}

/// Identical multisets collapsed to one representative with a multiplicity.
struct Groups<'a> {
    reps: Vec<&'a TripletMultiset>,
    sizes: Vec<u64>,
    of: Vec<usize>,
    dist: Vec<Vec<f64>>,
}

impl<'a> Groups<'a> {
    fn new(features: &'a [TripletMultiset]) -> Self {
        let mut index: HashMap<&TripletMultiset, usize> = HashMap::new();
        let mut reps = Vec::new();
        let mut sizes = Vec::new();
        let of = features
            .iter()
            .map(|f| {
                *index.entry(f).or_insert_with(|| {
                    reps.push(f);
                    sizes.push(0);
                    reps.len() - 1
                })
            })
            .collect::<Vec<usize>>();
        for &g in &of {
            sizes[g] += 1;
        }
        let dist: Vec<Vec<f64>> = reps
            .par_iter()
            .map(|a| reps.iter().map(|b| generalized_jaccard(a, b)).collect())
            .collect();
        Groups { reps, sizes, of, dist }
    }

    fn pair_distances(&self) -> Vec<(f64, u64)> {
        let mut out = Vec::new();
        for g in 0..self.reps.len() {
            let m = self.sizes[g];
            if m > 1 {
                out.push((0.0, m * (m - 1) / 2));
            }
            for h in g + 1..self.reps.len() {
                out.push((self.dist[g][h], m * self.sizes[h]));
            }
        }
        out
    }

    fn neighbor_count(&self, g: usize, r: f64) -> usize {
        let mut n = self.sizes[g] - 1;
        for h in 0..self.reps.len() {
            if h != g && self.dist[g][h] <= r {
                n += self.sizes[h];
            }
        }
        n as usize
    }
}

/// Neighbor counts within `r` for every member of the population.
pub fn neighbor_counts(features: &[TripletMultiset], r: f64) -> Vec<usize> {
    let groups = Groups::new(features);
    features
        .iter()
        .enumerate()
        .map(|(i, _)| groups.neighbor_count(groups.of[i], r))
        .collect()
}

/// Indices of the population members with fewer than `k` neighbors within `r`.
pub fn detect(features: &[TripletMultiset], params: &DetectionParams) -> Result<Vec<usize>, AnomalyError> {
    params.validate()?;
    if features.len() < 2 {
        return Err(AnomalyError::TooFewRoots(features.len()));
    }
    Ok(neighbor_counts(features, params.r)
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c < params.k)
        .map(|(i, _)| i)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub vm: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeDelta {
    pub code: String,
    pub count: u64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub subgraph: VmSubgraph,
    pub over_represented: Vec<CodeDelta>,
    pub under_represented: Vec<CodeDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmVerdict {
    pub vm: String,
    pub id: VertexId,
    pub neighbor_count: usize,
    pub flagged: bool,
    pub subgraph_vertices: usize,
    pub subgraph_edges: usize,
    pub nearest: Vec<Neighbor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub root_key: String,
    pub population: usize,
    pub params: DetectionParams,
    pub flagged: Vec<String>,
    pub vms: Vec<VmVerdict>,
}

fn median(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Full pipeline: roots are all entities with `config.root_key`.
pub fn analyze(graph: &StateGraph, config: &DetectionConfig) -> Result<AnomalyReport, AnomalyError> {
    config.validate()?;
    let roots: Vec<(&str, VertexId)> = graph
        .entities_of(&config.root_key)
        .into_iter()
        .map(|v| (v.entity_value().unwrap_or_default(), v.id))
        .collect();
    if roots.is_empty() {
        return Err(AnomalyError::NoRoots(config.root_key.clone()));
    }
    if roots.len() < 2 {
        return Err(AnomalyError::TooFewRoots(roots.len()));
    }
    let ids: Vec<VertexId> = roots.iter().map(|r| r.1).collect();
    let subs: HashMap<VertexId, VmSubgraph> = extract_subgraphs(graph, &ids, config.max_bfs_depth)?
        .into_iter()
        .map(|s| (s.root, s))
        .collect();
    let features: Vec<TripletMultiset> = ids
        .par_iter()
        .map(|id| featurize(graph, &subs[id], config.collapse_events))
        .collect();

    let n = features.len();
    let params = DetectionParams {
        k: config.k.unwrap_or_else(|| default_k(n, config.k_fraction)),
        r: config.r.unwrap_or_else(|| pairwise_percentile(&features, config.r_percentile)),
        max_bfs_depth: config.max_bfs_depth,
    };
    params.validate()?;

    let groups = Groups::new(&features);
    let codes: BTreeSet<&TripletCode> = features.iter().flat_map(|f| f.counts.keys()).collect();
    let medians: BTreeMap<&TripletCode, f64> = codes
        .into_par_iter()
        .map(|c| {
            let mut col: Vec<u64> = features.iter().map(|f| f.get(c)).collect();
            col.sort_unstable();
            (c, median(&col))
        })
        .collect();

    let vms: Vec<VmVerdict> = (0..n)
        .into_par_iter()
        .map(|i| {
            let g = groups.of[i];
            let neighbor_count = groups.neighbor_count(g, params.r);
            let flagged = neighbor_count < params.k;
            let mut near: Vec<(f64, &str)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (groups.dist[g][groups.of[j]], roots[j].0))
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
            near.truncate(config.top_neighbors);
            let sub = &subs[&ids[i]];
            let evidence = flagged.then(|| {
                let mut deltas: Vec<(f64, CodeDelta)> = medians
                    .iter()
                    .map(|(c, &m)| {
                        let count = features[i].get(c);
                        (
                            count as f64 - m,
                            CodeDelta {
                                code: c.to_string(),
                                count,
                                median: m,
                            },
                        )
                    })
                    .filter(|(d, _)| *d != 0.0)
                    .collect();
                deltas.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.code.cmp(&b.1.code)));
                let over: Vec<CodeDelta> = deltas
                    .iter()
                    .filter(|d| d.0 > 0.0)
                    .take(config.evidence_codes)
                    .map(|d| d.1.clone())
                    .collect();
                let under: Vec<CodeDelta> = deltas
                    .iter()
                    .rev()
                    .filter(|d| d.0 < 0.0)
                    .take(config.evidence_codes)
                    .map(|d| d.1.clone())
                    .collect();
                Evidence {
                    subgraph: sub.clone(),
                    over_represented: over,
                    under_represented: under,
                }
            });
            VmVerdict {
                vm: roots[i].0.to_string(),
                id: ids[i],
                neighbor_count,
                flagged,
                subgraph_vertices: sub.members.len() + sub.shared_frontier.len(),
                subgraph_edges: sub.edges.len(),
                nearest: near
                    .into_iter()
                    .map(|(d, vm)| Neighbor {
                        vm: vm.to_string(),
                        distance: d,
                    })
                    .collect(),
                evidence,
            }
        })
        .collect();

    Ok(AnomalyReport {
        root_key: config.root_key.clone(),
        population: n,
        params,
        flagged: vms.iter().filter(|v| v.flagged).map(|v| v.vm.clone()).collect(),
        vms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build, IdentifierPolicy};
    use crate::ingest::{Origin, Record, SourceType};

    fn code(depth: u32, dst: &str) -> TripletCode {
        TripletCode {
            depth,
            src: Signature {
                cat: VertexCategory::Entity,
                dtype: "uuid".into(),
            },
            kind: EdgeKind::Spatial,
            dst: Signature {
                cat: VertexCategory::State,
                dtype: dst.into(),
            },
        }
    }

    fn ms(items: &[(&str, u64)]) -> TripletMultiset {
        let mut m = TripletMultiset::default();
        for (c, n) in items {
            m.add(code(0, c), *n);
        }
        m
    }

    #[test]
    fn jaccard_worked_values() {
        let a = ms(&[("x", 2), ("y", 1)]);
        let b = ms(&[("x", 1), ("y", 1), ("z", 1)]);
        assert_eq!(jaccard_ratio(&a, &b), (2, 4));
        assert_eq!(generalized_jaccard(&a, &b), 0.5);
        assert_eq!(generalized_jaccard(&a, &a), 0.0);
        assert_eq!(generalized_jaccard(&ms(&[("x", 1)]), &ms(&[("y", 3)])), 1.0);
        assert_eq!(generalized_jaccard(&ms(&[]), &ms(&[])), 0.0);
        assert_eq!(generalized_jaccard(&ms(&[]), &ms(&[("y", 3)])), 1.0);
    }

    #[test]
    fn percentile_is_nearest_rank() {
        // Pairwise distances: 0 (a,a'), 1, 1 -> sorted [0, 1, 1].
        let f = vec![ms(&[("x", 1)]), ms(&[("x", 1)]), ms(&[("y", 1)])];
        assert_eq!(pairwise_percentile(&f, 10.0), 0.0);
        assert_eq!(pairwise_percentile(&f, 34.0), 1.0);
        assert_eq!(default_k(10, 0.02), 2);
        assert_eq!(default_k(201, 0.02), 5);
    }

    #[test]
    fn identical_population_has_no_flags() {
        let f = vec![ms(&[("x", 2)]); 6];
        for k in 1..=5 {
            let p = DetectionParams {
                k,
                r: 0.0,
                max_bfs_depth: 6,
            };
            assert!(detect(&f, &p).unwrap().is_empty());
        }
        assert_eq!(
            detect(&f[..1], &DetectionParams { k: 1, r: 0.0, max_bfs_depth: 6 }),
            Err(AnomalyError::TooFewRoots(1))
        );
    }

    fn rec(source: SourceType, line: u64, props: &[(&str, &str)]) -> Record {
        Record {
            source,
            timestamp: line as i64,
            props: props.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            origin: Origin {
                file: "a".into(),
                line,
            },
        }
    }

    #[test]
    fn shared_subnet_is_terminal() {
        let records = vec![
            rec(SourceType::Db, 1, &[("uuid", "vm-a"), ("port", "p-a")]),
            rec(SourceType::Db, 2, &[("uuid", "vm-b"), ("port", "p-b")]),
            rec(SourceType::Db, 3, &[("port", "p-a"), ("subnet", "net")]),
            rec(SourceType::Db, 4, &[("port", "p-b"), ("subnet", "net")]),
            rec(SourceType::Db, 5, &[("subnet", "net"), ("router", "r1")]),
        ];
        let (g, _) = build(&records, &IdentifierPolicy::only(["uuid", "port", "subnet", "router"])).unwrap();
        let a = g.entity("uuid", "vm-a").unwrap().id;
        let b = g.entity("uuid", "vm-b").unwrap().id;
        let net = g.entity("subnet", "net").unwrap().id;
        let router = g.entity("router", "r1").unwrap().id;
        let subs = extract_subgraphs(&g, &[a, b], 6).unwrap();
        for s in &subs {
            assert_eq!(s.shared_frontier.get(&net), Some(&4));
            assert!(!s.members.contains_key(&net));
            assert!(!s.members.contains_key(&router));
            assert_eq!(s.members.len(), 4);
            assert_eq!(s.members[&s.root], 0);
        }
    }

    #[test]
    fn smallest_featurization() {
        let records = vec![rec(SourceType::Libvirt, 1, &[("uuid", "vm-a")])];
        let (g, _) = build(&records, &IdentifierPolicy::only(["uuid"])).unwrap();
        let a = g.entity("uuid", "vm-a").unwrap().id;
        let subs = extract_subgraphs(&g, &[a], 6).unwrap();
        let m = featurize(&g, &subs[0], true);
        assert_eq!(m, ms(&[("Libvirt", 1)]));
    }

    #[test]
    fn bad_roots_and_params() {
        let records = vec![rec(SourceType::Libvirt, 1, &[("uuid", "vm-a")])];
        let (g, _) = build(&records, &IdentifierPolicy::only(["uuid"])).unwrap();
        let state = g.vertices().iter().find(|v| !v.is_entity()).unwrap().id;
        assert_eq!(extract_subgraphs(&g, &[state], 2), Err(AnomalyError::BadRoot(state)));
        assert!(DetectionParams { k: 0, r: 0.1, max_bfs_depth: 1 }.validate().is_err());
        assert!(DetectionParams { k: 1, r: 1.5, max_bfs_depth: 1 }.validate().is_err());
        let cfg = DetectionConfig {
            root_key: "vm".into(),
            ..DetectionConfig::default()
        };
        assert_eq!(analyze(&g, &cfg), Err(AnomalyError::NoRoots("vm".into())));
        assert_eq!(analyze(&g, &DetectionConfig::default()), Err(AnomalyError::TooFewRoots(1)));
    }
}
