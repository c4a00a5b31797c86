//! System operation state graph (SOSG).
//!
//! Heterogeneous operations data (database trigger logs, libvirt/OVS/Ceph
//! snapshots, component logs) is parsed into timestamped records, turned into
//! a property multigraph of entity, state and event vertices, and then used
//! for cross-component path queries and subgraph-distance anomaly detection.
//!
//! The pipeline is:
//!
//! 1. [`ingest`] parses raw files into [`ingest::Record`]s.
//! 2. [`builder`] turns records into a [`graph::StateGraph`]: state/event
//!    vertices, identifier discovery, entity vertices with spatial edges, and
//!    temporal edges.
//! 3. [`query`] answers latest-state and path questions over the sealed graph.
//! 4. [`anomaly`] extracts per-VM subgraphs and flags structural outliers.
//!
//! [`synth`] generates a synthetic OpenStack/Ceph-like corpus with injected
//! faults and a ground-truth topology.

pub mod anomaly;
pub mod builder;
pub mod dot;
pub mod graph;
pub mod ingest;
pub mod query;
pub mod synth;
pub mod time;

pub use anomaly::{AnomalyReport, DetectionConfig, DetectionParams, TripletMultiset};
pub use builder::{BuildReport, IdentifierPolicy};
pub use graph::{Edge, EdgeKind, StateGraph, Vertex, VertexCategory, VertexId};
pub use ingest::{FormatSpec, Record, SourceType};
