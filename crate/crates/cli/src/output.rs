//! Rendering of command results as JSON, tab-separated tables or Graphviz.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use sosg_core::anomaly::AnomalyReport;
use sosg_core::builder::BuildReport;
use sosg_core::dot;
use sosg_core::graph::{StateGraph, Vertex, VertexId};
use sosg_core::ingest::IngestReport;
use sosg_core::query::PathResult;
use sosg_core::synth::Corpus;
use sosg_core::time::format_micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
    Table,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn describe(v: &Vertex) -> Value {
    let mut o = json!({"id": v.id, "cat": v.category.code(), "dtype": v.dtype});
    match v.entity_value() {
        Some(val) if v.is_entity() => o["value"] = json!(val),
        _ => {
            if let Some(t) = v.timestamp {
                o["ts"] = json!(format_micros(t));
            }
            o["props"] = json!(v.props);
        }
    }
    o
}

fn short(v: &Vertex) -> String {
    if v.is_entity() {
        format!("{}={}", v.dtype, v.entity_value().unwrap_or_default())
    } else {
        format!("{}@{}", v.dtype, v.timestamp.map(format_micros).unwrap_or_default())
    }
}

fn render_vertices(graph: &StateGraph, name: &str, ids: &BTreeSet<VertexId>) -> String {
    dot::render(graph, name, ids, &BTreeSet::new(), &dot::induced_edges(graph, ids))
}

pub fn gen_summary(corpus: &Corpus, dir: &Path, format: Format) -> String {
    let mix = corpus.mix();
    match format {
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "corpus\t{}", dir.display());
            let _ = writeln!(s, "vms\t{}", corpus.truth.vms.len());
            let _ = writeln!(s, "hosts\t{}", corpus.truth.hosts.len());
            let _ = writeln!(s, "bytes\t{}", mix.total_bytes);
            for (g, f) in &mix.fractions {
                let _ = writeln!(s, "mix.{g}\t{f:.4}");
            }
            for f in &corpus.truth.injected {
                let _ = writeln!(s, "fault\t{:?}\t{}", f.kind, f.target_vm);
            }
            s
        }
        _ => to_json(&json!({
            "corpus": dir.display().to_string(),
            "seed": corpus.truth.seed,
            "vms": corpus.truth.vms.len(),
            "hosts": corpus.truth.hosts.len(),
            "mix": mix,
            "injected": corpus.truth.injected,
            "expected_anomalies": corpus.truth.expected_anomalies,
        })),
    }
}

pub fn build_summary(report: &BuildReport, ingest: &IngestReport, format: Format) -> String {
    match format {
        Format::Table => {
            let c = &report.counts;
            let mut s = String::new();
            let _ = writeln!(s, "records\t{}", report.records);
            let _ = writeln!(s, "deduped\t{}", ingest.deduped);
            let _ = writeln!(s, "skipped_malformed\t{}", ingest.totals.skipped_malformed);
            let _ = writeln!(s, "skipped_no_timestamp\t{}", ingest.totals.skipped_no_timestamp);
            let _ = writeln!(s, "entities\t{}", c.entities);
            let _ = writeln!(s, "states\t{}", c.states);
            let _ = writeln!(s, "events\t{}", c.events);
            let _ = writeln!(s, "spatial_edges\t{}", c.spatial_edges);
            let _ = writeln!(s, "temporal_edges\t{}", c.temporal_edges);
            for a in &report.accepted {
                let _ = writeln!(s, "identifier\t{}\t{}\t{:.2}", a.key, a.kind_count, a.mean_repetition);
            }
            for st in &report.steps {
                let _ = writeln!(s, "step\t{}\t{:.1}ms", st.step, st.wall_ms);
            }
            s
        }
        _ => to_json(&json!({"ingest": ingest, "build": report})),
    }
}

pub fn paths(graph: &StateGraph, result: &PathResult, format: Format) -> String {
    match format {
        Format::Table => {
            let mut s = String::new();
            for p in &result.paths {
                let parts: Vec<String> = p.iter().filter_map(|id| graph.vertex(*id)).map(short).collect();
                let _ = writeln!(s, "{}", parts.join(" -> "));
            }
            s
        }
        Format::Dot => {
            let ids: BTreeSet<VertexId> = result.paths.iter().flatten().copied().collect();
            render_vertices(graph, "paths", &ids)
        }
        Format::Json => {
            let paths: Vec<Value> = result
                .paths
                .iter()
                .map(|p| {
                    let bridges: Vec<&str> = p
                        .iter()
                        .skip(1)
                        .step_by(2)
                        .filter_map(|id| graph.vertex(*id))
                        .map(|v| v.dtype.as_str())
                        .collect();
                    json!({
                        "vertices": p.iter().filter_map(|id| graph.vertex(*id)).map(describe).collect::<Vec<_>>(),
                        "bridges": bridges,
                    })
                })
                .collect();
            to_json(&json!({"paths": paths, "stats": result.stats}))
        }
    }
}

pub fn latest(graph: &StateGraph, v: Option<&Vertex>, format: Format) -> String {
    match format {
        Format::Table => v.map(|v| format!("{}\t{}\n", short(v), json!(v.props))).unwrap_or_default(),
        Format::Dot => render_vertices(graph, "latest", &v.map(|v| v.id).into_iter().collect()),
        Format::Json => to_json(&v.map(describe).unwrap_or(Value::Null)),
    }
}

pub fn vertices(graph: &StateGraph, vs: &[&Vertex], format: Format) -> String {
    match format {
        Format::Table => vs.iter().map(|v| format!("{}\t{}\n", v.id, short(v))).collect(),
        Format::Dot => render_vertices(graph, "related", &vs.iter().map(|v| v.id).collect()),
        Format::Json => to_json(&vs.iter().map(|v| describe(v)).collect::<Vec<_>>()),
    }
}

pub fn detect(graph: &StateGraph, report: &AnomalyReport, format: Format) -> String {
    match format {
        Format::Table => {
            let mut s = format!(
                "# population={} k={} r={} flagged={}\n",
                report.population,
                report.params.k,
                report.params.r,
                report.flagged.len()
            );
            for v in &report.vms {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}",
                    v.vm,
                    if v.flagged { "FLAGGED" } else { "ok" },
                    v.neighbor_count,
                    v.subgraph_vertices,
                    v.subgraph_edges
                );
            }
            s
        }
        Format::Dot => {
            let mut s = String::new();
            for v in report.vms.iter().filter(|v| v.flagged) {
                if let Some(ev) = &v.evidence {
                    let sub = &ev.subgraph;
                    let mut ids: BTreeSet<VertexId> = sub.members.keys().copied().collect();
                    let shared: BTreeSet<VertexId> = sub.shared_frontier.keys().copied().collect();
                    ids.extend(shared.iter().copied());
                    s.push_str(&dot::render(graph, &v.vm, &ids, &shared, &sub.edges));
                }
            }
            s
        }
        Format::Json => to_json(report),
    }
}
