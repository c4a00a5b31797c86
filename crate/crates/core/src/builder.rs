//! Records to state graph, in four steps:
//!
//! 1. one state or event vertex per record;
//! 2. identifier discovery: property keys with many distinct values that each
//!    recur become identifier keys, and every distinct value an entity;
//! 3. a spatial edge between each state/event and every entity it contains,
//!    either as a property value or as a whole token of free text;
//! 4. temporal edges chaining, per entity and data type, the attached
//!    states/events in `(timestamp, id)` order.
//!
//! Every step is data-parallel; [`build_partitioned`] runs steps 1 and 2 per
//! partition and merges, producing the same canonical graph as [`build`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, GraphCounts, GraphError, StateGraph, Vertex, VertexCategory, VertexId, EDGE_KEYS_PROP, EDGE_VIA_PROP};
use crate::ingest::Record;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid identifier policy: {0}")]
    Policy(String),
}

/// Coarse syntactic class of a property's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeClass {
    UuidLike,
    IpLike,
    MacLike,
    PathLike,
    HostnameLike,
    Numeric,
    TimestampLike,
    FreeText,
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

const SHAPE_SAMPLE: usize = 1024;

fn uuid_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$")
            .expect("valid uuid regex")
    })
}

fn mac_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[0-9a-fA-F]{2}(:[0-9a-fA-F]{2}){5}$").expect("valid mac regex"))
}

fn timestamp_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2})?").expect("valid timestamp regex"))
}

fn numeric_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$").expect("valid numeric regex"))
}

fn hostname_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z0-9][A-Za-z0-9._-]*$").expect("valid hostname regex"))
}

/// Classifies a single value. Rules are tried in order: whitespace or empty
/// is free text, then uuid, mac, IPv4/IPv6 (optionally with a prefix length),
/// date-prefixed timestamps, numbers, anything containing `/` as a path, and
/// finally alphanumeric tokens containing a letter as hostname-like.
pub fn classify_value(v: &str) -> ShapeClass {
    if v.is_empty() || v.chars().any(char::is_whitespace) {
        return ShapeClass::FreeText;
    }
    if uuid_re().is_match(v) {
        return ShapeClass::UuidLike;
    }
    if mac_re().is_match(v) {
        return ShapeClass::MacLike;
    }
    let addr = v.split_once('/').map_or(v, |(a, len)| {
        if len.parse::<u8>().is_ok() {
            a
        } else {
            ""
        }
    });
    if addr.contains(['.', ':']) && addr.parse::<std::net::IpAddr>().is_ok() {
        return ShapeClass::IpLike;
    }
    if timestamp_re().is_match(v) {
        return ShapeClass::TimestampLike;
    }
    if numeric_re().is_match(v) {
        return ShapeClass::Numeric;
    }
    if v.contains('/') {
        return ShapeClass::PathLike;
    }
    if hostname_re().is_match(v) && v.chars().any(|c| c.is_ascii_alphabetic()) {
        return ShapeClass::HostnameLike;
    }
    ShapeClass::FreeText
}

/// Majority class over a deterministic sample of the distinct values (evenly
/// spaced in sorted order, at most 1024). Ties go to the earlier class.
fn classify_key<'a>(distinct: impl Iterator<Item = &'a str>) -> ShapeClass {
    let mut values: Vec<&str> = distinct.collect();
    values.sort_unstable();
    let step = values.len().div_ceil(SHAPE_SAMPLE).max(1);
    let mut tally: BTreeMap<ShapeClass, usize> = BTreeMap::new();
    for v in values.iter().step_by(step) {
        *tally.entry(classify_value(v)).or_default() += 1;
    }
    let best = tally.values().copied().max().unwrap_or(0);
    tally
        .into_iter()
        .find(|&(_, n)| n == best)
        .map_or(ShapeClass::FreeText, |(c, _)| c)
}

/// Rules for accepting a property key as an identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifierPolicy {
    pub min_kind: u64,
    pub min_mean_repetition: f64,
    pub excluded_shapes: BTreeSet<ShapeClass>,
    /// Keys always accepted (when present), regardless of statistics.
    pub include: BTreeSet<String>,
    /// Keys never accepted. Wins over `include`.
    pub exclude: BTreeSet<String>,
}

impl Default for IdentifierPolicy {
    fn default() -> Self {
        IdentifierPolicy {
            min_kind: 10,
            min_mean_repetition: 2.0,
            excluded_shapes: [ShapeClass::Numeric, ShapeClass::TimestampLike, ShapeClass::FreeText]
                .into_iter()
                .collect(),
            include: BTreeSet::new(),
            exclude: BTreeSet::new(),
        }
    }
}

impl IdentifierPolicy {
    /// A policy that accepts exactly `keys`.
    pub fn only<I: IntoIterator<Item = S>, S: Into<String>>(keys: I) -> Self {
        IdentifierPolicy {
            min_kind: u64::MAX,
            include: keys.into_iter().map(Into::into).collect(),
            ..IdentifierPolicy::default()
        }
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        if self.min_kind == 0 {
            return Err(BuildError::Policy("min_kind must be positive".into()));
        }
        if !(self.min_mean_repetition > 0.0) {
            return Err(BuildError::Policy("min_mean_repetition must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifierStats {
    pub key: String,
    pub kind_count: u64,
    pub occurrence_count: u64,
    pub mean_repetition: f64,
    pub shape_class: ShapeClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedKey {
    #[serde(flatten)]
    pub stats: IdentifierStats,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub accepted: Vec<IdentifierStats>,
    pub rejected: Vec<RejectedKey>,
}

/// Per-key value counts. Partition-local tables merge by addition.
#[derive(Debug, Default)]
pub struct ValueCounts<'a> {
    keys: HashMap<&'a str, HashMap<&'a str, u64>>,
}

impl<'a> ValueCounts<'a> {
    fn from_vertices(vertices: &'a [Vertex]) -> Self {
        let mut keys: HashMap<&str, HashMap<&str, u64>> = HashMap::new();
        for v in vertices.iter().filter(|v| !v.is_entity()) {
            for (k, val) in &v.props {
                *keys.entry(k.as_str()).or_default().entry(val.as_str()).or_default() += 1;
            }
        }
        ValueCounts { keys }
    }

    fn merge(mut self, other: ValueCounts<'a>) -> Self {
        for (k, vals) in other.keys {
            let slot = self.keys.entry(k).or_default();
            for (v, n) in vals {
                *slot.entry(v).or_default() += n;
            }
        }
        self
    }

    fn collect(vertices: &'a [Vertex]) -> Self {
        vertices
            .par_chunks(4096)
            .map(ValueCounts::from_vertices)
            .reduce(ValueCounts::default, ValueCounts::merge)
    }

    fn decide(&self, policy: &IdentifierPolicy) -> Discovery {
        let mut keys: Vec<&&str> = self.keys.keys().collect();
        keys.sort_unstable();
        let mut out = Discovery::default();
        for key in keys {
            let vals = &self.keys[*key];
            let kind_count = vals.len() as u64;
            let occurrence_count: u64 = vals.values().sum();
            let stats = IdentifierStats {
                key: key.to_string(),
                kind_count,
                occurrence_count,
                mean_repetition: occurrence_count as f64 / kind_count as f64,
                shape_class: classify_key(vals.keys().copied()),
            };
            let reason = if policy.exclude.contains(*key) {
                Some("manually excluded".to_string())
            } else if policy.include.contains(*key) {
                None
            } else if policy.excluded_shapes.contains(&stats.shape_class) {
                Some(format!("shape {} excluded", stats.shape_class))
            } else if stats.kind_count < policy.min_kind {
                Some(format!("kind_count {} < {}", stats.kind_count, policy.min_kind))
            } else if stats.mean_repetition < policy.min_mean_repetition {
                Some(format!(
                    "mean_repetition {:.3} < {}",
                    stats.mean_repetition, policy.min_mean_repetition
                ))
            } else {
                None
            };
            match reason {
                None => out.accepted.push(stats),
                Some(reason) => out.rejected.push(RejectedKey { stats, reason }),
            }
        }
        out
    }

    fn distinct_values(&self, key: &str) -> Vec<&'a str> {
        let mut vals: Vec<&str> = self
            .keys
            .get(key)
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default();
        vals.sort_unstable();
        vals
    }
}

/// Step 1: one vertex per record; Log and Cephlog become events, the rest
/// states.
pub fn build_state_event_vertices(records: &[Record]) -> Result<StateGraph, BuildError> {
    let vertices: Vec<Vertex> = records.par_iter().map(Vertex::from_record).collect();
    let mut g = StateGraph::new();
    for v in vertices {
        g.add_vertex(v)?;
    }
    Ok(g)
}

/// Step 2 statistics: which property keys behave like identifiers.
pub fn discover_identifiers(graph: &StateGraph, policy: &IdentifierPolicy) -> Result<Discovery, BuildError> {
    policy.validate()?;
    Ok(ValueCounts::collect(graph.vertices()).decide(policy))
}

/// Splits free text into candidate identifier tokens: runs of alphanumerics
/// and `- _ . /`, with those four characters trimmed from both ends.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || matches!(c, '-' | '_' | '.' | '/')))
        .map(|t| t.trim_matches(|c| matches!(c, '-' | '_' | '.' | '/')))
        .filter(|t| !t.is_empty())
}

/// Steps 2 and 3: entity vertices for every distinct value of each accepted
/// key, and one spatial edge per (state/event, contained entity) pair. A
/// vertex contains an entity when one of its property values, or a token of
/// one, equals the entity's value. The edge records the contributing keys.
pub fn materialize_entities_and_spatial_edges(
    graph: &mut StateGraph,
    accepted: &[IdentifierStats],
) -> Result<(), BuildError> {
    let counts = ValueCounts::collect(graph.vertices());
    let mut entities: Vec<Vertex> = Vec::new();
    for stats in accepted {
        for value in counts.distinct_values(&stats.key) {
            entities.push(Vertex::entity(&stats.key, value));
        }
    }
    drop(counts);
    materialize(graph, entities)
}

fn materialize(graph: &mut StateGraph, entities: Vec<Vertex>) -> Result<(), BuildError> {
    let mut by_value: HashMap<String, Vec<VertexId>> = HashMap::new();
    for v in entities {
        let value = v.entity_value().unwrap_or_default().to_string();
        let id = graph.add_vertex(v)?;
        by_value.entry(value).or_default().push(id);
    }
    for ids in by_value.values_mut() {
        ids.sort_unstable();
        ids.dedup();
    }

    let edges: Vec<Edge> = graph
        .vertices()
        .par_iter()
        .filter(|v| !v.is_entity())
        .flat_map_iter(|v| {
            let mut hits: BTreeMap<VertexId, BTreeSet<&str>> = BTreeMap::new();
            for (k, val) in &v.props {
                if let Some(ids) = by_value.get(val.as_str()) {
                    for &id in ids {
                        hits.entry(id).or_default().insert(k);
                    }
                }
                for tok in tokens(val) {
                    if tok.len() == val.len() {
                        continue;
                    }
                    if let Some(ids) = by_value.get(tok) {
                        for &id in ids {
                            hits.entry(id).or_default().insert(k);
                        }
                    }
                }
            }
            let vid = v.id;
            hits.into_iter().map(move |(ent, keys)| {
                let keys: Vec<&str> = keys.into_iter().collect();
                Edge::spatial(ent, vid).with_prop(EDGE_KEYS_PROP, keys.join(","))
            })
        })
        .collect();
    for e in edges {
        graph.add_edge(e)?;
    }
    Ok(())
}

/// Step 4: for every entity and every data type attached to it, chain the
/// attached vertices by `(timestamp, id)`. Each edge names its entity in the
/// `via` property, so one pair of vertices can be linked once per shared
/// entity.
pub fn link_temporal(graph: &mut StateGraph) -> Result<(), BuildError> {
    let edges: Vec<Edge> = {
        let g: &StateGraph = graph;
        let entity_idx: Vec<usize> = (0..g.len()).filter(|&i| g.at(i).is_entity()).collect();
        entity_idx
            .par_iter()
            .flat_map_iter(|&ent| {
                let mut groups: BTreeMap<&str, Vec<(i64, VertexId)>> = BTreeMap::new();
                for other in g.spatial_neighbors(ent) {
                    let v = g.at(other);
                    groups
                        .entry(v.dtype.as_str())
                        .or_default()
                        .push((v.timestamp.unwrap_or_default(), v.id));
                }
                let via = g.at(ent).id;
                let mut out = Vec::new();
                for (_, mut members) in groups {
                    members.sort_unstable();
                    members.dedup();
                    for w in members.windows(2) {
                        out.push(Edge::temporal(w[0].1, w[1].1).with_prop(EDGE_VIA_PROP, via.to_string()));
                    }
                }
                out
            })
            .collect()
    };
    for e in edges {
        graph.add_edge(e)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: String,
    pub wall_ms: f64,
}

/// Summary of one build, emitted as JSON by the CLI.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub records: usize,
    pub partitions: usize,
    pub steps: Vec<StepReport>,
    pub counts: GraphCounts,
    pub accepted: Vec<IdentifierStats>,
    pub rejected: Vec<RejectedKey>,
}

struct Timer {
    start: Instant,
    steps: Vec<StepReport>,
}

impl Timer {
    fn new() -> Self {
        Timer {
            start: Instant::now(),
            steps: Vec::new(),
        }
    }

    fn lap(&mut self, step: &str) {
        let now = Instant::now();
        self.steps.push(StepReport {
            step: step.to_string(),
            wall_ms: (now - self.start).as_secs_f64() * 1e3,
        });
        self.start = now;
    }
}

/// Runs all four steps and seals the graph.
pub fn build(records: &[Record], policy: &IdentifierPolicy) -> Result<(StateGraph, BuildReport), BuildError> {
    build_partitioned(&[records], policy)
}

/// Builds from disjoint record partitions. Step 1 and the step 2 value
/// counts run per partition and are merged; the result is identical to a
/// build over the concatenated records.
pub fn build_partitioned<P: AsRef<[Record]> + Sync>(
    partitions: &[P],
    policy: &IdentifierPolicy,
) -> Result<(StateGraph, BuildReport), BuildError> {
    policy.validate()?;
    let mut timer = Timer::new();
    let records: usize = partitions.iter().map(|p| p.as_ref().len()).sum();

    let parts: Vec<Vec<Vertex>> = partitions
        .par_iter()
        .map(|p| p.as_ref().iter().map(Vertex::from_record).collect())
        .collect();
    let mut graph = StateGraph::new();
    for part in &parts {
        for v in part {
            graph.add_vertex(v.clone())?;
        }
    }
    timer.lap("state_event_vertices");

    let (discovery, entities) = {
        let counts = parts
            .par_iter()
            .map(|p| ValueCounts::collect(p))
            .reduce(ValueCounts::default, ValueCounts::merge);
        let discovery = counts.decide(policy);
        let entities: Vec<Vertex> = discovery
            .accepted
            .iter()
            .flat_map(|s| {
                counts
                    .distinct_values(&s.key)
                    .into_iter()
                    .map(|v| Vertex::entity(&s.key, v))
            })
            .collect();
        (discovery, entities)
    };
    drop(parts);
    timer.lap("discover_identifiers");

    materialize(&mut graph, entities)?;
    timer.lap("entities_and_spatial_edges");

    link_temporal(&mut graph)?;
    graph.seal();
    timer.lap("temporal_edges");

    let report = BuildReport {
        records,
        partitions: partitions.len(),
        steps: timer.steps,
        counts: graph.counts(),
        accepted: discovery.accepted,
        rejected: discovery.rejected,
    };
    Ok((graph, report))
}

/// Vertex category a record maps to.
pub fn category_of(record: &Record) -> VertexCategory {
    if record.source.is_event() {
        VertexCategory::Event
    } else {
        VertexCategory::State
    }
}
