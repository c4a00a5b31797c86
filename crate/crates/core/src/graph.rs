//! The state graph: a directed property multigraph of entity, state and event
//! vertices joined by spatial and temporal edges.
//!
//! Persistence is a directory of three files: `manifest.json` (counts and
//! SHA-256 of each part), `vertices.jsonl` sorted by id, and `edges.jsonl`
//! sorted by `(src, dst, kind)`. The same graph always serializes to the same
//! bytes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::Record;
use crate::time::Micros;

pub const FORMAT_VERSION: u32 = 1;

/// Property key under which an entity vertex stores its identifier value.
pub const ENTITY_VALUE_KEY: &str = "value";
/// Spatial edge property listing the record keys that matched the entity.
pub const EDGE_KEYS_PROP: &str = "keys";
/// Temporal edge property naming the entity whose timeline the edge belongs to.
pub const EDGE_VIA_PROP: &str = "via";

const ID_MASK: u64 = (1 << 53) - 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid vertex: {0}")]
    InvalidVertex(String),
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("vertex id collision on {0}")]
    IdCollision(VertexId),
    #[error("graph is sealed")]
    Sealed,
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("corrupt graph file {section} at byte {offset}: {reason}")]
    Corrupt {
        section: &'static str,
        offset: u64,
        reason: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Stable vertex identifier. Ids fit in 53 bits so they survive a round trip
/// through any JSON implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexCategory {
    Entity,
    State,
    Event,
}

impl VertexCategory {
    pub fn code(self) -> &'static str {
        match self {
            VertexCategory::Entity => "E",
            VertexCategory::State => "S",
            VertexCategory::Event => "V",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "E" => Some(VertexCategory::Entity),
            "S" => Some(VertexCategory::State),
            "V" => Some(VertexCategory::Event),
            _ => None,
        }
    }
}

impl fmt::Display for VertexCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VertexCategory::Entity => "Entity",
            VertexCategory::State => "State",
            VertexCategory::Event => "Event",
        })
    }
}

impl Serialize for VertexCategory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for VertexCategory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        VertexCategory::from_code(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown vertex category `{raw}`")))
    }
}

/// A graph vertex.
///
/// For state and event vertices `dtype` is the data source name and `props`
/// holds the record's key-value pairs. For entity vertices `dtype` is the
/// identifier key (`uuid`, `host`, ...) and `props` holds the single value
/// under [`ENTITY_VALUE_KEY`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    #[serde(rename = "cat")]
    pub category: VertexCategory,
    pub dtype: String,
    #[serde(rename = "ts")]
    pub timestamp: Option<Micros>,
    pub props: BTreeMap<String, String>,
}

impl Vertex {
    pub fn entity(key: &str, value: &str) -> Vertex {
        let id = hash_id(&[b"E", key.as_bytes(), value.as_bytes()]);
        Vertex {
            id,
            category: VertexCategory::Entity,
            dtype: key.to_string(),
            timestamp: None,
            props: BTreeMap::from([(ENTITY_VALUE_KEY.to_string(), value.to_string())]),
        }
    }

    /// A state or event vertex for one record. The id hashes the category,
    /// source, properties, timestamp and origin.
    pub fn from_record(record: &Record) -> Vertex {
        let category = if record.source.is_event() {
            VertexCategory::Event
        } else {
            VertexCategory::State
        };
        let mut canon = Vec::with_capacity(256);
        for (k, v) in &record.props {
            canon.extend_from_slice(k.as_bytes());
            canon.push(0x1f);
            canon.extend_from_slice(v.as_bytes());
            canon.push(0x1e);
        }
        let ts = record.timestamp.to_string();
        let line = record.origin.line.to_string();
        let id = hash_id(&[
            category.code().as_bytes(),
            record.source.as_str().as_bytes(),
            &canon,
            ts.as_bytes(),
            record.origin.file.as_bytes(),
            line.as_bytes(),
        ]);
        Vertex {
            id,
            category,
            dtype: record.source.as_str().to_string(),
            timestamp: Some(record.timestamp),
            props: record.props.clone(),
        }
    }

    pub fn is_entity(&self) -> bool {
        self.category == VertexCategory::Entity
    }

    /// The identifier value of an entity vertex.
    pub fn entity_value(&self) -> Option<&str> {
        if self.is_entity() {
            self.props.get(ENTITY_VALUE_KEY).map(String::as_str)
        } else {
            None
        }
    }

    fn validate(&self) -> Result<(), GraphError> {
        if self.dtype.is_empty() {
            return Err(GraphError::InvalidVertex(format!("{}: empty dtype", self.id)));
        }
        if self.id.0 > ID_MASK {
            return Err(GraphError::InvalidVertex(format!("{}: id exceeds 53 bits", self.id)));
        }
        match self.category {
            VertexCategory::Entity => {
                if self.timestamp.is_some() {
                    return Err(GraphError::InvalidVertex(format!(
                        "{}: entity vertices carry no timestamp",
                        self.id
                    )));
                }
                if self.props.len() != 1 || self.entity_value().is_none() {
                    return Err(GraphError::InvalidVertex(format!(
                        "{}: entity vertices hold exactly one `{ENTITY_VALUE_KEY}` property",
                        self.id
                    )));
                }
            }
            _ => {
                if self.timestamp.is_none() {
                    return Err(GraphError::InvalidVertex(format!(
                        "{}: {} vertices need a timestamp",
                        self.id, self.category
                    )));
                }
                if self.props.is_empty() {
                    return Err(GraphError::InvalidVertex(format!("{}: no properties", self.id)));
                }
            }
        }
        Ok(())
    }
}

fn hash_id(parts: &[&[u8]]) -> VertexId {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    VertexId(u64::from_be_bytes(b) & ID_MASK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Spatial,
    Temporal,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Spatial => "spatial",
            EdgeKind::Temporal => "temporal",
        })
    }
}

/// A directed edge. Spatial edges are stored entity → state/event; temporal
/// edges point forward in time.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: VertexId,
    pub dst: VertexId,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub props: BTreeMap<String, String>,
}

impl Edge {
    pub fn spatial(entity: VertexId, other: VertexId) -> Edge {
        Edge {
            src: entity,
            dst: other,
            kind: EdgeKind::Spatial,
            props: BTreeMap::new(),
        }
    }

    pub fn temporal(earlier: VertexId, later: VertexId) -> Edge {
        Edge {
            src: earlier,
            dst: later,
            kind: EdgeKind::Temporal,
            props: BTreeMap::new(),
        }
    }

    pub fn with_prop(mut self, key: &str, value: impl Into<String>) -> Edge {
        self.props.insert(key.to_string(), value.into());
        self
    }

    /// The entity whose timeline a temporal edge belongs to.
    pub fn via(&self) -> Option<VertexId> {
        self.props.get(EDGE_VIA_PROP)?.parse().ok().map(VertexId)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphCounts {
    pub entities: usize,
    pub states: usize,
    pub events: usize,
    pub spatial_edges: usize,
    pub temporal_edges: usize,
}

impl GraphCounts {
    pub fn vertices(&self) -> usize {
        self.entities + self.states + self.events
    }

    pub fn edges(&self) -> usize {
        self.spatial_edges + self.temporal_edges
    }
}

/// The state graph. Vertices and edges are addressed internally by dense
/// indices; [`VertexId`] is the stable external name.
#[derive(Debug, Clone, Default)]
pub struct StateGraph {
    vertices: Vec<Vertex>,
    index: HashMap<VertexId, usize>,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    entities: HashMap<String, HashMap<String, usize>>,
    by_value: HashMap<String, Vec<usize>>,
    timelines: HashMap<(usize, String), Vec<usize>>,
    counts: GraphCounts,
    sealed: bool,
}

impl StateGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a vertex and returns its id. Entities are upserted by
    /// `(dtype, value)`.
    pub fn add_vertex(&mut self, v: Vertex) -> Result<VertexId, GraphError> {
        if self.sealed {
            return Err(GraphError::Sealed);
        }
        v.validate()?;
        if let Some(value) = v.entity_value() {
            if let Some(&idx) = self.entities.get(&v.dtype).and_then(|m| m.get(value)) {
                return Ok(self.vertices[idx].id);
            }
        }
        if let Some(&existing) = self.index.get(&v.id) {
            return Err(if self.vertices[existing] == v {
                GraphError::InvalidVertex(format!("{}: duplicate vertex", v.id))
            } else {
                GraphError::IdCollision(v.id)
            });
        }
        let idx = self.vertices.len();
        let id = v.id;
        match v.category {
            VertexCategory::Entity => {
                let value = v.entity_value().unwrap_or_default().to_string();
                self.entities
                    .entry(v.dtype.clone())
                    .or_default()
                    .insert(value.clone(), idx);
                self.by_value.entry(value).or_default().push(idx);
                self.counts.entities += 1;
            }
            VertexCategory::State => self.counts.states += 1,
            VertexCategory::Event => self.counts.events += 1,
        }
        self.index.insert(id, idx);
        self.vertices.push(v);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        Ok(id)
    }

    pub fn add_edge(&mut self, e: Edge) -> Result<(), GraphError> {
        if self.sealed {
            return Err(GraphError::Sealed);
        }
        let s = self.require(e.src, "src")?;
        let d = self.require(e.dst, "dst")?;
        let (sv, dv) = (&self.vertices[s], &self.vertices[d]);
        match e.kind {
            EdgeKind::Spatial => {
                if !sv.is_entity() || dv.is_entity() {
                    return Err(GraphError::InvalidEdge(format!(
                        "spatial edge {} -> {} must run from an entity to a state or event",
                        e.src, e.dst
                    )));
                }
            }
            EdgeKind::Temporal => {
                if sv.is_entity() || dv.is_entity() {
                    return Err(GraphError::InvalidEdge(format!(
                        "temporal edge {} -> {} touches an entity",
                        e.src, e.dst
                    )));
                }
                if dv.timestamp < sv.timestamp {
                    return Err(GraphError::InvalidEdge(format!(
                        "temporal edge {} -> {} points backwards in time",
                        e.src, e.dst
                    )));
                }
            }
        }
        let eidx = self.edges.len();
        match e.kind {
            EdgeKind::Spatial => self.counts.spatial_edges += 1,
            EdgeKind::Temporal => self.counts.temporal_edges += 1,
        }
        self.out_adj[s].push(eidx);
        self.in_adj[d].push(eidx);
        self.edges.push(e);
        Ok(())
    }

    fn require(&self, id: VertexId, which: &str) -> Result<usize, GraphError> {
        self.index
            .get(&id)
            .copied()
            .ok_or_else(|| GraphError::InvalidEdge(format!("{which} {id} does not exist")))
    }

    /// Freezes the graph and builds the per-(entity, dtype) timelines.
    pub fn seal(&mut self) {
        if self.sealed {
            return;
        }
        let mut timelines: HashMap<(usize, String), Vec<usize>> = HashMap::new();
        for e in &self.edges {
            if e.kind != EdgeKind::Spatial {
                continue;
            }
            let ent = self.index[&e.src];
            let other = self.index[&e.dst];
            timelines
                .entry((ent, self.vertices[other].dtype.clone()))
                .or_default()
                .push(other);
        }
        for list in timelines.values_mut() {
            list.sort_by_key(|&i| (self.vertices[i].timestamp, self.vertices[i].id));
            list.dedup();
        }
        self.timelines = timelines;
        self.sealed = true;
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn counts(&self) -> GraphCounts {
        self.counts
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, id: VertexId) -> Option<&Vertex> {
        self.index.get(&id).map(|&i| &self.vertices[i])
    }

    pub fn idx(&self, id: VertexId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn at(&self, idx: usize) -> &Vertex {
        &self.vertices[idx]
    }

    pub fn edge(&self, eidx: usize) -> &Edge {
        &self.edges[eidx]
    }

    pub fn out_edges(&self, idx: usize) -> &[usize] {
        &self.out_adj[idx]
    }

    pub fn in_edges(&self, idx: usize) -> &[usize] {
        &self.in_adj[idx]
    }

    /// Vertices joined to `idx` by a spatial edge, in either direction.
    pub fn spatial_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let outs = self.out_adj[idx].iter().filter_map(move |&e| {
            let edge = &self.edges[e];
            (edge.kind == EdgeKind::Spatial).then(|| self.index[&edge.dst])
        });
        let ins = self.in_adj[idx].iter().filter_map(move |&e| {
            let edge = &self.edges[e];
            (edge.kind == EdgeKind::Spatial).then(|| self.index[&edge.src])
        });
        outs.chain(ins)
    }

    pub fn entity(&self, dtype: &str, value: &str) -> Option<&Vertex> {
        let idx = *self.entities.get(dtype)?.get(value)?;
        Some(&self.vertices[idx])
    }

    /// Entity vertices holding `value`, under any identifier key.
    pub fn entities_with_value(&self, value: &str) -> Vec<&Vertex> {
        self.by_value
            .get(value)
            .map(|v| v.iter().map(|&i| &self.vertices[i]).collect())
            .unwrap_or_default()
    }

    /// Entity vertices of one identifier key, sorted by value.
    pub fn entities_of(&self, dtype: &str) -> Vec<&Vertex> {
        let mut out: Vec<&Vertex> = self
            .entities
            .get(dtype)
            .map(|m| m.values().map(|&i| &self.vertices[i]).collect())
            .unwrap_or_default();
        out.sort_by(|a, b| a.entity_value().cmp(&b.entity_value()));
        out
    }

    pub fn entity_dtypes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.entities.keys().map(String::as_str).collect();
        out.sort_unstable();
        out
    }

    /// State/event vertices of one dtype attached to `entity`, sorted by
    /// `(timestamp, id)`. Available once the graph is sealed.
    pub fn timeline(&self, entity: VertexId, dtype: &str) -> Vec<&Vertex> {
        let Some(&idx) = self.index.get(&entity) else {
            return Vec::new();
        };
        self.timelines
            .get(&(idx, dtype.to_string()))
            .map(|v| v.iter().map(|&i| &self.vertices[i]).collect())
            .unwrap_or_default()
    }

    /// Latest timestamp of any state or event.
    pub fn max_time(&self) -> Option<Micros> {
        self.vertices.iter().filter_map(|v| v.timestamp).max()
    }

    /// Full structural check: edge endpoints, entity uniqueness, no
    /// entity-entity edges, temporal direction, and agreement between the
    /// timeline index and the temporal chains.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        let distinct: usize = self.entities.values().map(HashMap::len).sum();
        if distinct != self.counts.entities {
            return Err(GraphError::Invariant(format!(
                "{} entity vertices but {distinct} distinct (dtype, value) pairs",
                self.counts.entities
            )));
        }
        for e in &self.edges {
            let (Some(s), Some(d)) = (self.vertex(e.src), self.vertex(e.dst)) else {
                return Err(GraphError::Invariant(format!("dangling edge {} -> {}", e.src, e.dst)));
            };
            if s.is_entity() && d.is_entity() {
                return Err(GraphError::Invariant(format!(
                    "entity-entity edge {} -> {}",
                    e.src, e.dst
                )));
            }
            if e.kind == EdgeKind::Temporal && d.timestamp < s.timestamp {
                return Err(GraphError::Invariant(format!(
                    "temporal edge {} -> {} goes back in time",
                    e.src, e.dst
                )));
            }
        }
        if self.sealed {
            let mut chains: HashMap<(VertexId, &str), Vec<(VertexId, VertexId)>> = HashMap::new();
            for e in &self.edges {
                if e.kind != EdgeKind::Temporal {
                    continue;
                }
                let Some(via) = e.via() else { continue };
                let dtype = self.vertex(e.src).map(|v| v.dtype.as_str()).unwrap_or_default();
                chains.entry((via, dtype)).or_default().push((e.src, e.dst));
            }
            for ((via, dtype), mut links) in chains {
                let tl = self.timeline(via, dtype);
                let mut expected: Vec<(VertexId, VertexId)> =
                    tl.windows(2).map(|w| (w[0].id, w[1].id)).collect();
                links.sort();
                expected.sort();
                if links != expected {
                    return Err(GraphError::Invariant(format!(
                        "temporal chain of entity {via} / {dtype} disagrees with its timeline"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the canonical three-file form into `dir` (created if needed).
    pub fn save(&self, dir: &Path) -> Result<(), GraphError> {
        self.check_invariants()?;
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let (vbytes, ebytes) = self.canonical_parts();
        let manifest = Manifest {
            version: FORMAT_VERSION,
            vertex_count: self.vertices.len() as u64,
            edge_count: self.edges.len() as u64,
            sha256: PartHashes {
                vertices: sha256_hex(&vbytes),
                edges: sha256_hex(&ebytes),
            },
        };
        let mut mbytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        mbytes.push(b'\n');
        for (name, bytes) in [
            ("vertices.jsonl", &vbytes),
            ("edges.jsonl", &ebytes),
            ("manifest.json", &mbytes),
        ] {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }

    /// The `vertices.jsonl` and `edges.jsonl` byte streams.
    pub fn canonical_parts(&self) -> (Vec<u8>, Vec<u8>) {
        let mut verts: Vec<&Vertex> = self.vertices.iter().collect();
        verts.sort_by_key(|v| v.id);
        let mut vbytes = Vec::with_capacity(verts.len() * 160);
        for v in verts {
            serde_json::to_writer(&mut vbytes, v).expect("vertex serializes");
            vbytes.push(b'\n');
        }
        let mut edges: Vec<&Edge> = self.edges.iter().collect();
        edges.sort();
        let mut ebytes = Vec::with_capacity(edges.len() * 64);
        for e in edges {
            serde_json::to_writer(&mut ebytes, e).expect("edge serializes");
            ebytes.push(b'\n');
        }
        (vbytes, ebytes)
    }

    /// Reads a graph written by [`StateGraph::save`]; the result is sealed.
    pub fn load(dir: &Path) -> Result<StateGraph, GraphError> {
        let mpath = dir.join("manifest.json");
        let mbytes = fs::read(&mpath).map_err(|e| io_err(&mpath, e))?;
        let manifest: Manifest = serde_json::from_slice(&mbytes).map_err(|e| GraphError::Corrupt {
            section: "manifest",
            offset: 0,
            reason: e.to_string(),
        })?;
        if manifest.version != FORMAT_VERSION {
            return Err(GraphError::Corrupt {
                section: "manifest",
                offset: 0,
                reason: format!("unsupported version {}", manifest.version),
            });
        }
        let vpath = dir.join("vertices.jsonl");
        let vbytes = fs::read(&vpath).map_err(|e| io_err(&vpath, e))?;
        verify_part("vertices", &vbytes, &manifest.sha256.vertices)?;
        let epath = dir.join("edges.jsonl");
        let ebytes = fs::read(&epath).map_err(|e| io_err(&epath, e))?;
        verify_part("edges", &ebytes, &manifest.sha256.edges)?;

        let mut g = StateGraph::new();
        for (offset, line) in lines_with_offsets(&vbytes) {
            let corrupt = |reason: String| GraphError::Corrupt {
                section: "vertices",
                offset,
                reason,
            };
            let v: Vertex = serde_json::from_slice(line).map_err(|e| corrupt(e.to_string()))?;
            let id = v.id;
            let got = g.add_vertex(v).map_err(|e| corrupt(e.to_string()))?;
            if got != id {
                return Err(corrupt(format!("duplicate entity {id}")));
            }
        }
        for (offset, line) in lines_with_offsets(&ebytes) {
            let corrupt = |reason: String| GraphError::Corrupt {
                section: "edges",
                offset,
                reason,
            };
            let e: Edge = serde_json::from_slice(line).map_err(|e| corrupt(e.to_string()))?;
            g.add_edge(e).map_err(|e| corrupt(e.to_string()))?;
        }
        if g.vertices.len() as u64 != manifest.vertex_count {
            return Err(GraphError::Corrupt {
                section: "vertices",
                offset: vbytes.len() as u64,
                reason: format!(
                    "manifest says {} vertices, found {}",
                    manifest.vertex_count,
                    g.vertices.len()
                ),
            });
        }
        if g.edges.len() as u64 != manifest.edge_count {
            return Err(GraphError::Corrupt {
                section: "edges",
                offset: ebytes.len() as u64,
                reason: format!("manifest says {} edges, found {}", manifest.edge_count, g.edges.len()),
            });
        }
        g.seal();
        Ok(g)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    vertex_count: u64,
    edge_count: u64,
    sha256: PartHashes,
}

#[derive(Debug, Serialize, Deserialize)]
struct PartHashes {
    vertices: String,
    edges: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn verify_part(section: &'static str, bytes: &[u8], expected: &str) -> Result<(), GraphError> {
    let got = sha256_hex(bytes);
    if got != expected {
        return Err(GraphError::Corrupt {
            section,
            offset: 0,
            reason: format!("sha256 mismatch: manifest {expected}, file {got}"),
        });
    }
    Ok(())
}

fn lines_with_offsets(bytes: &[u8]) -> impl Iterator<Item = (u64, &[u8])> {
    let mut offset = 0usize;
    bytes.split(|&b| b == b'\n').filter_map(move |line| {
        let start = offset;
        offset += line.len() + 1;
        (!line.is_empty()).then_some((start as u64, line))
    })
}

fn io_err(path: &Path, source: std::io::Error) -> GraphError {
    GraphError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Origin, SourceType};

    pub(crate) fn state(source: SourceType, ts: Micros, props: &[(&str, &str)], line: u64) -> Vertex {
        Vertex::from_record(&Record {
            source,
            timestamp: ts,
            props: props.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            origin: Origin {
                file: "t".into(),
                line,
            },
        })
    }

    #[test]
    fn entity_upsert_is_idempotent() {
        let mut g = StateGraph::new();
        let a = g.add_vertex(Vertex::entity("uuid", "xxx-xx1")).unwrap();
        let b = g.add_vertex(Vertex::entity("uuid", "xxx-xx1")).unwrap();
        assert_eq!(a, b);
        assert_eq!(g.counts().entities, 1);
        let c = g.add_vertex(Vertex::entity("instance", "xxx-xx1")).unwrap();
        assert_ne!(a, c);
        assert_eq!(g.entities_with_value("xxx-xx1").len(), 2);
    }

    #[test]
    fn entity_with_timestamp_is_rejected() {
        let mut g = StateGraph::new();
        let mut v = Vertex::entity("uuid", "u");
        v.timestamp = Some(5);
        assert!(matches!(g.add_vertex(v), Err(GraphError::InvalidVertex(_))));
        let mut s = state(SourceType::Db, 1, &[("a", "b")], 1);
        s.timestamp = None;
        assert!(matches!(g.add_vertex(s), Err(GraphError::InvalidVertex(_))));
    }

    #[test]
    fn ten_thousand_distinct_entities() {
        let mut g = StateGraph::new();
        let mut oracle = std::collections::HashSet::new();
        let mut ids = std::collections::HashSet::new();
        for i in 0..10_000 {
            let key = if i % 3 == 0 { "host" } else { "uuid" };
            let value = format!("v{}", i / 2);
            oracle.insert((key, value.clone()));
            ids.insert(g.add_vertex(Vertex::entity(key, &value)).unwrap());
        }
        assert_eq!(ids.len(), oracle.len());
        assert_eq!(g.counts().entities, oracle.len());
        let indexed: usize = g.entity_dtypes().iter().map(|d| g.entities_of(d).len()).sum();
        assert_eq!(indexed, oracle.len());
    }

    #[test]
    fn edge_rules() {
        let mut g = StateGraph::new();
        let e1 = g.add_vertex(Vertex::entity("uuid", "a")).unwrap();
        let e2 = g.add_vertex(Vertex::entity("ip", "10.0.0.1")).unwrap();
        let s1 = g.add_vertex(state(SourceType::Db, 10, &[("uuid", "a")], 1)).unwrap();
        let s2 = g.add_vertex(state(SourceType::Db, 5, &[("uuid", "a")], 2)).unwrap();
        assert!(g.add_edge(Edge::spatial(e1, e2)).is_err());
        assert!(g.add_edge(Edge::spatial(s1, e1)).is_err());
        assert!(g.add_edge(Edge::temporal(s1, s2)).is_err());
        assert!(g.add_edge(Edge::temporal(e1, s1)).is_err());
        assert!(g.add_edge(Edge::spatial(e1, VertexId(42))).is_err());
        g.add_edge(Edge::spatial(e1, s1)).unwrap();
        g.add_edge(Edge::spatial(e1, s1)).unwrap();
        assert_eq!(g.counts().spatial_edges, 2);
        g.add_edge(Edge::temporal(s2, s1)).unwrap();
        g.seal();
        assert!(matches!(g.add_vertex(Vertex::entity("uuid", "z")), Err(GraphError::Sealed)));
    }

    #[test]
    fn empty_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = StateGraph::new();
        g.save(dir.path()).unwrap();
        let back = StateGraph::load(dir.path()).unwrap();
        assert!(back.is_empty());
        assert!(back.edges().is_empty());
    }

    #[test]
    fn corrupt_line_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = StateGraph::new();
        g.add_vertex(Vertex::entity("uuid", "a")).unwrap();
        g.add_vertex(Vertex::entity("uuid", "b")).unwrap();
        g.save(dir.path()).unwrap();

        let vpath = dir.path().join("vertices.jsonl");
        let mut bytes = fs::read(&vpath).unwrap();
        let second = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        bytes[second] = b'#';
        fs::write(&vpath, &bytes).unwrap();
        match StateGraph::load(dir.path()) {
            Err(GraphError::Corrupt { section, .. }) => assert_eq!(section, "vertices"),
            other => panic!("expected checksum failure, got {other:?}"),
        }

        // Patch the manifest so the checksum passes and the parser must point
        // at the broken line.
        let mpath = dir.path().join("manifest.json");
        let mut m: serde_json::Value = serde_json::from_slice(&fs::read(&mpath).unwrap()).unwrap();
        m["sha256"]["vertices"] = serde_json::Value::String(sha256_hex(&bytes));
        fs::write(&mpath, serde_json::to_vec(&m).unwrap()).unwrap();
        match StateGraph::load(dir.path()) {
            Err(GraphError::Corrupt { section, offset, .. }) => {
                assert_eq!(section, "vertices");
                assert_eq!(offset, second as u64);
            }
            other => panic!("expected parse failure, got {other:?}"),
        }
    }

    #[test]
    fn vertex_line_format() {
        let v = Vertex::entity("host", "n005");
        let line = serde_json::to_string(&v).unwrap();
        assert_eq!(
            line,
            format!(r#"{{"id":{},"cat":"E","dtype":"host","ts":null,"props":{{"value":"n005"}}}}"#, v.id)
        );
        let e = Edge::spatial(VertexId(1), VertexId(2));
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"src":1,"dst":2,"kind":"spatial"}"#);
    }
}
