//! Graphviz rendering of graph fragments. Entities are boxes, states
//! parallelograms, events hexagons; shared vertices are dashed.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::graph::{EdgeKind, StateGraph, Vertex, VertexCategory, VertexId};
use crate::time::format_micros;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn label(v: &Vertex) -> String {
    let detail = match v.category {
        VertexCategory::Entity => v.entity_value().unwrap_or_default().to_string(),
        _ => v.timestamp.map(format_micros).unwrap_or_default(),
    };
    let detail: String = detail.chars().take(48).collect();
    format!("{}\\n{}", escape(&v.dtype), escape(&detail))
}

fn shape(c: VertexCategory) -> &'static str {
    match c {
        VertexCategory::Entity => "box",
        VertexCategory::State => "parallelogram",
        VertexCategory::Event => "hexagon",
    }
}

/// Renders `vertices` and every graph edge between two of them. Vertices in
/// `shared` are drawn dashed.
pub fn render(
    graph: &StateGraph,
    name: &str,
    vertices: &BTreeSet<VertexId>,
    shared: &BTreeSet<VertexId>,
    edges: &[usize],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(name));
    for id in vertices {
        let Some(v) = graph.vertex(*id) else { continue };
        let style = if shared.contains(id) { ",style=dashed" } else { "" };
        let _ = writeln!(out, "  \"{}\" [shape={},label=\"{}\"{}];", id, shape(v.category), label(v), style);
    }
    for &e in edges {
        let edge = graph.edge(e);
        let style = match edge.kind {
            EdgeKind::Spatial => "",
            EdgeKind::Temporal => " [style=dotted]",
        };
        let _ = writeln!(out, "  \"{}\" -> \"{}\"{};", edge.src, edge.dst, style);
    }
    out.push_str("}\n");
    out
}

/// Edge indices with both endpoints in `vertices`.
pub fn induced_edges(graph: &StateGraph, vertices: &BTreeSet<VertexId>) -> Vec<usize> {
    let mut out: Vec<usize> = vertices
        .iter()
        .filter_map(|id| graph.idx(*id))
        .flat_map(|i| graph.out_edges(i).iter().copied())
        .filter(|&e| vertices.contains(&graph.edge(e).dst))
        .collect();
    out.sort_unstable();
    out
}
