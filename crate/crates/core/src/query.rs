//! State queries as graph traversals.
//!
//! Paths alternate entity and state/event vertices,
//! `entity -> bridge -> entity -> ...`, and their length is counted in entity
//! hops. [`QueryEngine::find_paths`] returns, for every reachable target, all
//! shortest simple paths to it, optionally restricting the bridge data type
//! allowed at each hop and the bridges' timestamps.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{StateGraph, Vertex, VertexId};
use crate::time::Micros;

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("no entity matches `{0}`")]
    NotFound(String),
    #[error("`{selector}` is ambiguous; candidates: {}", candidates.join(", "))]
    Ambiguous { selector: String, candidates: Vec<String> },
    #[error("invalid query: {0}")]
    Invalid(String),
}

/// Names an entity either as `key=value` or by a bare value that must be
/// unique across identifier keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySelector {
    pub dtype: Option<String>,
    pub value: String,
}

impl EntitySelector {
    pub fn new(dtype: &str, value: &str) -> Self {
        EntitySelector {
            dtype: Some(dtype.to_string()),
            value: value.to_string(),
        }
    }

    pub fn bare(value: &str) -> Self {
        EntitySelector {
            dtype: None,
            value: value.to_string(),
        }
    }

    /// Parses `key=value` when `key` is one of the graph's identifier keys,
    /// otherwise treats the whole text as a bare value.
    pub fn parse(text: &str, graph: &StateGraph) -> Self {
        if let Some((k, v)) = text.split_once('=') {
            if graph.entity_dtypes().contains(&k) {
                return EntitySelector::new(k, v);
            }
        }
        EntitySelector::bare(text)
    }

    pub fn resolve<'g>(&self, graph: &'g StateGraph) -> Result<&'g Vertex, QueryError> {
        match &self.dtype {
            Some(d) => graph
                .entity(d, &self.value)
                .ok_or_else(|| QueryError::NotFound(self.to_string())),
            None => {
                let mut found = graph.entities_with_value(&self.value);
                match found.len() {
                    0 => Err(QueryError::NotFound(self.to_string())),
                    1 => Ok(found[0]),
                    _ => {
                        found.sort_by(|a, b| a.dtype.cmp(&b.dtype));
                        Err(QueryError::Ambiguous {
                            selector: self.to_string(),
                            candidates: found
                                .iter()
                                .map(|v| format!("{}={}", v.dtype, self.value))
                                .collect(),
                        })
                    }
                }
            }
        }
    }
}

impl fmt::Display for EntitySelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.dtype {
            Some(d) => write!(f, "{d}={}", self.value),
            None => f.write_str(&self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Entity(EntitySelector),
    /// Every entity with this identifier key, other than the start.
    Dtype(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathQuery {
    pub from: EntitySelector,
    pub to: Target,
    pub max_depth: usize,
    /// Allowed bridge dtypes per hop. Hops past the end of the list are
    /// unconstrained.
    pub type_constraints: Option<Vec<BTreeSet<String>>>,
    /// Only bridges with a timestamp at or before this instant are crossed.
    pub at_time: Option<Micros>,
    pub limit: usize,
}

pub const DEFAULT_MAX_DEPTH: usize = 8;
pub const DEFAULT_LIMIT: usize = 100;

impl PathQuery {
    pub fn new(from: EntitySelector, to: Target) -> Self {
        PathQuery {
            from,
            to,
            max_depth: DEFAULT_MAX_DEPTH,
            type_constraints: None,
            at_time: None,
            limit: DEFAULT_LIMIT,
        }
    }

    pub fn with_max_depth(mut self, d: usize) -> Self {
        self.max_depth = d;
        self
    }

    pub fn with_constraints<I, S>(mut self, hops: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.type_constraints = Some(
            hops.into_iter()
                .map(|s| {
                    s.as_ref()
                        .split('|')
                        .map(str::to_string)
                        .collect::<BTreeSet<String>>()
                })
                .collect(),
        );
        self
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn at(mut self, t: Option<Micros>) -> Self {
        self.at_time = t;
        self
    }

    fn validate(&self) -> Result<(), QueryError> {
        if self.max_depth == 0 {
            return Err(QueryError::Invalid("max_depth must be at least 1".into()));
        }
        if self.limit == 0 {
            return Err(QueryError::Invalid("limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub visited_entities: usize,
    pub visited_bridges: usize,
    pub depth_reached: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathResult {
    pub paths: Vec<Vec<VertexId>>,
    pub stats: SearchStats,
}

impl PathResult {
    /// Distinct path end points, sorted.
    pub fn endpoints(&self) -> Vec<VertexId> {
        let set: BTreeSet<VertexId> = self.paths.iter().filter_map(|p| p.last().copied()).collect();
        set.into_iter().collect()
    }
}

/// Identifier keys used by the convenience queries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Vocabulary {
    pub vm: String,
    pub host: String,
    pub subnet: String,
    pub block: String,
    pub image: String,
    pub object_id: String,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            vm: "uuid".into(),
            host: "host".into(),
            subnet: "subnet".into(),
            block: "block".into(),
            image: "image".into(),
            object_id: "object_id".into(),
        }
    }
}

/// Read-only query interface over a sealed graph.
pub struct QueryEngine<'g> {
    graph: &'g StateGraph,
    vocab: Vocabulary,
}

/// Membership bitmap over dense vertex indices.
#[derive(Clone)]
struct Marks(Vec<bool>);

impl Marks {
    fn new(n: usize) -> Self {
        Marks(vec![false; n])
    }

    fn has(&self, i: usize) -> bool {
        self.0[i]
    }

    fn set(&mut self, i: usize) -> bool {
        !std::mem::replace(&mut self.0[i], true)
    }
}

struct Search<'a> {
    graph: &'a StateGraph,
    constraints: Option<&'a [BTreeSet<String>]>,
    at_time: Option<Micros>,
    bridges_seen: HashSet<usize>,
}

impl<'a> Search<'a> {
    fn bridge_allowed(&self, b: usize, hop: usize) -> bool {
        let v = self.graph.at(b);
        if v.is_entity() {
            return false;
        }
        if let Some(t) = self.at_time {
            if v.timestamp.map_or(true, |ts| ts > t) {
                return false;
            }
        }
        match self.constraints.and_then(|c| c.get(hop)) {
            Some(allowed) => allowed.contains(&v.dtype),
            None => true,
        }
    }

    /// `(bridge, next entity)` pairs for one hop from `e`.
    fn hops(&mut self, e: usize, hop: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for b in self.graph.spatial_neighbors(e) {
            if !self.bridge_allowed(b, hop) {
                continue;
            }
            self.bridges_seen.insert(b);
            for n in self.graph.spatial_neighbors(b) {
                if n != e {
                    out.push((b, n));
                }
            }
        }
        out
    }
}

impl<'g> QueryEngine<'g> {
    pub fn new(graph: &'g StateGraph) -> Self {
        QueryEngine {
            graph,
            vocab: Vocabulary::default(),
        }
    }

    pub fn with_vocabulary(mut self, vocab: Vocabulary) -> Self {
        self.vocab = vocab;
        self
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn graph(&self) -> &'g StateGraph {
        self.graph
    }

    /// The `dtype` state/event attached to `entity` with the greatest
    /// timestamp at or before `at_time` (default: the graph's latest time).
    pub fn latest_state(
        &self,
        entity: &EntitySelector,
        dtype: &str,
        at_time: Option<Micros>,
    ) -> Result<Option<&'g Vertex>, QueryError> {
        let ent = entity.resolve(self.graph)?;
        let timeline = self.graph.timeline(ent.id, dtype);
        let cutoff = at_time.unwrap_or(Micros::MAX);
        let n = timeline.partition_point(|v| v.timestamp.unwrap_or(Micros::MIN) <= cutoff);
        Ok(n.checked_sub(1).map(|i| timeline[i]))
    }

    pub fn find_paths(&self, q: &PathQuery) -> Result<PathResult, QueryError> {
        q.validate()?;
        let g = self.graph;
        let start = g
            .idx(q.from.resolve(g)?.id)
            .ok_or_else(|| QueryError::NotFound(q.from.to_string()))?;
        let mut targets = Marks::new(g.len());
        match &q.to {
            Target::Entity(sel) => {
                let t = sel.resolve(g)?;
                if let Some(i) = g.idx(t.id) {
                    targets.set(i);
                }
            }
            Target::Dtype(d) => {
                for v in g.entities_of(d) {
                    if let Some(i) = g.idx(v.id) {
                        if i != start {
                            targets.set(i);
                        }
                    }
                }
            }
        }
        let single = matches!(q.to, Target::Entity(_));
        Ok(self.search(start, &targets, single, q))
    }

    fn search(&self, start: usize, targets: &Marks, single: bool, q: &PathQuery) -> PathResult {
        let g = self.graph;
        let n = g.len();
        let constrained = q.type_constraints.is_some();
        let mut s = Search {
            graph: g,
            constraints: q.type_constraints.as_deref(),
            at_time: q.at_time,
            bridges_seen: HashSet::new(),
        };
        let mut stats = SearchStats::default();
        let mut result: Vec<Vec<VertexId>> = Vec::new();

        // Layer i holds the entities reachable by a walk of exactly i hops.
        // Without constraints shortest walks are simple paths, so each entity
        // is kept only in the first layer that reaches it.
        let mut layers: Vec<Vec<usize>> = vec![vec![start]];
        let mut layer_marks: Vec<Marks> = vec![{
            let mut m = Marks::new(n);
            m.set(start);
            m
        }];
        let mut seen = layer_marks[0].clone();
        let mut resolved = Marks::new(n);
        let mut entities_seen = seen.clone();
        let mut unresolved_single = single;

        for depth in 0..=q.max_depth {
            if depth > 0 {
                let mut next = Vec::new();
                let mut marks = Marks::new(n);
                for &e in &layers[depth - 1] {
                    for (_, nb) in s.hops(e, depth - 1) {
                        if !constrained && seen.has(nb) {
                            continue;
                        }
                        if marks.set(nb) {
                            next.push(nb);
                            entities_seen.set(nb);
                        }
                    }
                }
                if !constrained {
                    for &e in &next {
                        seen.set(e);
                    }
                }
                if next.is_empty() {
                    break;
                }
                layers.push(next);
                layer_marks.push(marks);
            }
            stats.depth_reached = depth;

            let wanted: Vec<usize> = layers[depth]
                .iter()
                .copied()
                .filter(|&e| targets.has(e) && !resolved.has(e))
                .collect();
            if !wanted.is_empty() {
                let (paths, truncated) = self.paths_at_depth(&mut s, start, depth, &wanted, &layer_marks, q.limit);
                stats.truncated |= truncated;
                for p in &paths {
                    if let Some(&last) = p.last() {
                        if let Some(i) = g.idx(last) {
                            resolved.set(i);
                        }
                    }
                }
                // Targets cut off by the limit still have their shortest
                // length here and must not resurface at a deeper layer.
                if truncated {
                    for &w in &wanted {
                        if !resolved.has(w)
                            && (!constrained
                                || !self
                                    .paths_at_depth(&mut s, start, depth, &[w], &layer_marks, 1)
                                    .0
                                    .is_empty())
                        {
                            resolved.set(w);
                        }
                    }
                }
                result.extend(paths);
                if single && wanted.iter().any(|&w| resolved.has(w)) {
                    unresolved_single = false;
                }
            }
            if single && !unresolved_single {
                break;
            }
        }

        result.sort();
        if result.len() > q.limit {
            result.truncate(q.limit);
            stats.truncated = true;
        }
        stats.visited_entities = entities_seen.0.iter().filter(|&&b| b).count();
        stats.visited_bridges = s.bridges_seen.len();
        PathResult { paths: result, stats }
    }

    /// All simple paths of exactly `depth` hops from `start` to a vertex in
    /// `wanted`, in lexicographic order, at most `limit` of them.
    fn paths_at_depth(
        &self,
        s: &mut Search<'_>,
        start: usize,
        depth: usize,
        wanted: &[usize],
        layer_marks: &[Marks],
        limit: usize,
    ) -> (Vec<Vec<VertexId>>, bool) {
        let g = self.graph;
        let n = g.len();
        // useful[i]: entities in layer i that reach `wanted` in depth - i hops.
        let mut useful: Vec<Marks> = vec![Marks::new(n); depth + 1];
        let mut frontier: Vec<usize> = wanted.to_vec();
        for &w in wanted {
            useful[depth].set(w);
        }
        for i in (0..depth).rev() {
            let mut prev = Vec::new();
            for &e in &frontier {
                for (_, p) in s.hops(e, i) {
                    if layer_marks[i].has(p) && useful[i].set(p) {
                        prev.push(p);
                    }
                }
            }
            frontier = prev;
        }
        if !useful[0].has(start) {
            return (Vec::new(), false);
        }

        struct Dfs<'x> {
            g: &'x StateGraph,
            depth: usize,
            useful: &'x [Marks],
            on_path: HashSet<usize>,
            path: Vec<usize>,
            out: Vec<Vec<VertexId>>,
            limit: usize,
            truncated: bool,
        }

        fn step(d: &mut Dfs<'_>, s: &mut Search<'_>, e: usize, hop: usize) {
            if d.out.len() >= d.limit {
                d.truncated = true;
                return;
            }
            if hop == d.depth {
                d.out.push(d.path.iter().map(|&i| d.g.at(i).id).collect());
                return;
            }
            let mut children: Vec<(VertexId, VertexId, usize, usize)> = s
                .hops(e, hop)
                .into_iter()
                .filter(|&(b, nb)| d.useful[hop + 1].has(nb) && !d.on_path.contains(&b) && !d.on_path.contains(&nb))
                .map(|(b, nb)| (d.g.at(b).id, d.g.at(nb).id, b, nb))
                .collect();
            children.sort_unstable();
            children.dedup();
            for (_, _, b, nb) in children {
                d.on_path.insert(b);
                d.on_path.insert(nb);
                d.path.push(b);
                d.path.push(nb);
                step(d, s, nb, hop + 1);
                d.path.truncate(d.path.len() - 2);
                d.on_path.remove(&b);
                d.on_path.remove(&nb);
                if d.truncated {
                    return;
                }
            }
        }

        let mut d = Dfs {
            g,
            depth,
            useful: &useful,
            on_path: HashSet::from([start]),
            path: vec![start],
            out: Vec::new(),
            limit,
            truncated: false,
        };
        step(&mut d, s, start, 0);
        (d.out, d.truncated)
    }

    /// Entities with identifier key `target_dtype` reachable from `entity`
    /// within `max_depth` hops, sorted by id.
    pub fn list_related(
        &self,
        entity: &EntitySelector,
        target_dtype: &str,
        max_depth: usize,
        type_constraints: Option<Vec<BTreeSet<String>>>,
        at_time: Option<Micros>,
    ) -> Result<Vec<&'g Vertex>, QueryError> {
        let q = PathQuery {
            from: entity.clone(),
            to: Target::Dtype(target_dtype.to_string()),
            max_depth,
            type_constraints,
            at_time,
            limit: usize::MAX,
        };
        let r = self.find_paths(&q)?;
        Ok(r.endpoints()
            .into_iter()
            .filter_map(|id| self.graph.vertex(id))
            .collect())
    }

    fn hop_sets(hops: &[&str]) -> Vec<BTreeSet<String>> {
        hops.iter().map(|h| BTreeSet::from([h.to_string()])).collect()
    }

    /// Blocks backing a VM's images: VM -DB-> image -Cephimage-> object
    /// prefix -Cephfile-> block.
    pub fn cephfiles_for_vm(&self, vm: &str, at_time: Option<Micros>) -> Result<Vec<&'g Vertex>, QueryError> {
        self.list_related(
            &EntitySelector::new(&self.vocab.vm, vm),
            &self.vocab.block,
            3,
            Some(Self::hop_sets(&["DB", "Cephimage", "Cephfile"])),
            at_time,
        )
    }

    /// VMs with a port in a subnet: subnet -DB-> port address -Ovs-> VM.
    pub fn vms_in_subnet(&self, subnet: &str, at_time: Option<Micros>) -> Result<Vec<&'g Vertex>, QueryError> {
        self.list_related(
            &EntitySelector::new(&self.vocab.subnet, subnet),
            &self.vocab.vm,
            2,
            Some(Self::hop_sets(&["DB", "Ovs"])),
            at_time,
        )
    }

    /// VMs affected by a host failure: those running on it (via Libvirt) and
    /// those whose image blocks it stores (via Cephfile, Cephimage, DB).
    pub fn affected_vms(&self, host: &str, at_time: Option<Micros>) -> Result<Vec<&'g Vertex>, QueryError> {
        let from = EntitySelector::new(&self.vocab.host, host);
        let mut out = self.list_related(&from, &self.vocab.vm, 1, Some(Self::hop_sets(&["Libvirt"])), at_time)?;
        out.extend(self.list_related(
            &from,
            &self.vocab.vm,
            3,
            Some(Self::hop_sets(&["Cephfile", "Cephimage", "DB"])),
            at_time,
        )?);
        out.sort_by_key(|v| v.id);
        out.dedup_by_key(|v| v.id);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build, IdentifierPolicy};
    use crate::ingest::{Origin, Record, SourceType};

    fn rec(source: SourceType, ts: i64, props: &[(&str, &str)]) -> Record {
        static LINE: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
        Record {
            source,
            timestamp: ts,
            props: props.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            origin: Origin {
                file: "q".into(),
                line: LINE.fetch_add(1, std::sync::atomic::Ordering::Relaxed),
            },
        }
    }

    fn policy() -> IdentifierPolicy {
        IdentifierPolicy::only(["uuid", "host", "image", "object_id", "block"])
    }

    #[test]
    fn latest_state_is_max_at_or_before() {
        let records: Vec<Record> = [10, 20, 30]
            .iter()
            .map(|&t| rec(SourceType::Libvirt, t, &[("uuid", "vm-a"), ("state", &t.to_string())]))
            .collect();
        let (g, _) = build(&records, &policy()).unwrap();
        let q = QueryEngine::new(&g);
        let sel = EntitySelector::new("uuid", "vm-a");
        assert_eq!(q.latest_state(&sel, "Libvirt", Some(25)).unwrap().unwrap().timestamp, Some(20));
        assert_eq!(q.latest_state(&sel, "Libvirt", None).unwrap().unwrap().timestamp, Some(30));
        assert!(q.latest_state(&sel, "Libvirt", Some(5)).unwrap().is_none());
        assert!(q.latest_state(&sel, "Ovs", None).unwrap().is_none());
    }

    #[test]
    fn selectors() {
        let records = vec![
            rec(SourceType::Db, 1, &[("uuid", "x1"), ("host", "x1")]),
            rec(SourceType::Db, 2, &[("uuid", "x2")]),
        ];
        let (g, _) = build(&records, &IdentifierPolicy::only(["uuid", "host"])).unwrap();
        assert_eq!(EntitySelector::parse("uuid=x2", &g), EntitySelector::new("uuid", "x2"));
        assert_eq!(EntitySelector::parse("a=b", &g), EntitySelector::bare("a=b"));
        assert!(EntitySelector::bare("x2").resolve(&g).is_ok());
        match EntitySelector::bare("x1").resolve(&g) {
            Err(QueryError::Ambiguous { candidates, .. }) => {
                assert_eq!(candidates, vec!["host=x1", "uuid=x1"])
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            EntitySelector::bare("nope").resolve(&g),
            Err(QueryError::NotFound("nope".into()))
        );
    }

    #[test]
    fn identity_path() {
        let records = vec![rec(SourceType::Db, 1, &[("uuid", "x")])];
        let (g, _) = build(&records, &policy()).unwrap();
        let e = g.entity("uuid", "x").unwrap().id;
        let sel = EntitySelector::new("uuid", "x");
        let r = QueryEngine::new(&g)
            .find_paths(&PathQuery::new(sel.clone(), Target::Entity(sel)))
            .unwrap();
        assert_eq!(r.paths, vec![vec![e]]);
    }

    /// host -Cephfile-> object_id -Cephimage-> image -DB-> uuid, plus a
    /// shorter Libvirt link from another host.
    fn ceph_chain() -> StateGraph {
        let records = vec![
            rec(SourceType::Cephfile, 1, &[("host", "h1"), ("object_id", "rbd_data.aa"), ("block", "rbd_data.aa.01")]),
            rec(SourceType::Cephimage, 2, &[("object_id", "rbd_data.aa"), ("image", "img-1")]),
            rec(SourceType::Db, 3, &[("image", "img-1"), ("uuid", "vm-1")]),
            rec(SourceType::Libvirt, 4, &[("host", "h2"), ("uuid", "vm-1")]),
        ];
        build(&records, &policy()).unwrap().0
    }

    #[test]
    fn host_to_vm_across_ceph() {
        let g = ceph_chain();
        let q = QueryEngine::new(&g);
        let r = q
            .find_paths(&PathQuery::new(
                EntitySelector::new("host", "h1"),
                Target::Entity(EntitySelector::new("uuid", "vm-1")),
            ))
            .unwrap();
        assert_eq!(r.paths.len(), 1);
        let dtypes: Vec<&str> = r.paths[0].iter().map(|id| g.vertex(*id).unwrap().dtype.as_str()).collect();
        assert_eq!(dtypes, vec!["host", "Cephfile", "object_id", "Cephimage", "image", "DB", "uuid"]);

        let affected = q.affected_vms("h1", None).unwrap();
        assert_eq!(affected.len(), 1);
        let affected = q.affected_vms("h2", None).unwrap();
        assert_eq!(affected.len(), 1);
        assert_eq!(q.cephfiles_for_vm("vm-1", None).unwrap().len(), 1);
        assert!(q.vms_in_subnet("10.0.0.0/24", None).is_err());
    }

    #[test]
    fn at_time_hides_later_bridges() {
        let g = ceph_chain();
        let q = QueryEngine::new(&g);
        let query = PathQuery::new(
            EntitySelector::new("host", "h1"),
            Target::Entity(EntitySelector::new("uuid", "vm-1")),
        );
        assert!(q.find_paths(&query.clone().at(Some(2))).unwrap().paths.is_empty());
        assert_eq!(q.find_paths(&query.at(Some(3))).unwrap().paths.len(), 1);
    }

    #[test]
    fn constraints_prune() {
        let g = ceph_chain();
        let q = QueryEngine::new(&g);
        let base = PathQuery::new(EntitySelector::new("host", "h1"), Target::Dtype("uuid".into()));
        assert_eq!(q.find_paths(&base.clone().with_constraints(["Cephfile", "Cephimage", "DB"])).unwrap().paths.len(), 1);
        assert!(q.find_paths(&base.clone().with_constraints(["Cephfile", "DB"])).unwrap().paths.is_empty());
        assert!(q.find_paths(&base.with_max_depth(2)).unwrap().paths.is_empty());
    }

    #[test]
    fn invalid_queries() {
        let g = ceph_chain();
        let q = QueryEngine::new(&g);
        let base = PathQuery::new(EntitySelector::new("host", "h1"), Target::Dtype("uuid".into()));
        assert!(matches!(q.find_paths(&base.clone().with_max_depth(0)), Err(QueryError::Invalid(_))));
        assert!(matches!(q.find_paths(&base.with_limit(0)), Err(QueryError::Invalid(_))));
    }
}
