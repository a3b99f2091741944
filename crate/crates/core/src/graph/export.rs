use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{GraphError, StrategyGraph, VertexId};
use crate::dsl::{parse_label_function, print_label_function, ApiRegistry, Origin};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Json,
    Dot,
}

impl std::str::FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(GraphFormat::Json),
            "dot" => Ok(GraphFormat::Dot),
            other => Err(format!("unknown graph format '{other}' (expected json or dot)")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    task_id: String,
    #[serde(default)]
    iteration_created: u32,
    vertices: Vec<VertexDoc>,
    edges: Vec<[u32; 2]>,
}

#[derive(Serialize, Deserialize)]
struct VertexDoc {
    id: u32,
    label_fn: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Origin>,
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

pub fn export_graph(g: &StrategyGraph, format: GraphFormat) -> String {
    match format {
        GraphFormat::Json => {
            let doc = GraphDoc {
                task_id: g.task_id.clone(),
                iteration_created: g.iteration_created,
                vertices: g
                    .vertices()
                    .map(|(id, lf)| VertexDoc { id: id.0, label_fn: print_label_function(lf), origin: Some(lf.origin) })
                    .collect(),
                edges: g.edges().map(|(a, b)| [a.0, b.0]).collect(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("graph document serializes");
            s.push('\n');
            s
        }
        GraphFormat::Dot => {
            let mut s = format!("digraph \"{}\" {{\n", dot_escape(&g.task_id));
            s.push_str("  rankdir=LR;\n");
            for (id, lf) in g.vertices() {
                let first = &lf.guards[0];
                let args: Vec<String> = first.args.iter().map(|a| format!("'{a}'")).collect();
                let mut label = format!("{}({})", first.api, args.join(", "));
                if lf.guards.len() > 1 {
                    label.push_str(&format!(" +{}", lf.guards.len() - 1));
                }
                s.push_str(&format!("  {id} [label=\"{}\"];\n", dot_escape(&label)));
            }
            for (a, b) in g.edges() {
                s.push_str(&format!("  {a} -> {b};\n"));
            }
            s.push_str("}\n");
            s
        }
    }
}

/// Reads the JSON form written by [`export_graph`].
pub fn import_graph(text: &str, registry: &ApiRegistry) -> Result<StrategyGraph, GraphError> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
    let mut vertices = BTreeMap::new();
    for v in doc.vertices {
        let mut lf = parse_label_function(&v.label_fn, registry)
            .map_err(|e| GraphError::Format(format!("vertex {}: {e}", v.id)))?;
        lf.origin = v.origin.unwrap_or(Origin::Expert);
        if vertices.insert(VertexId(v.id), lf).is_some() {
            return Err(GraphError::Format(format!("duplicate vertex id {}", v.id)));
        }
    }
    let edges: BTreeSet<(VertexId, VertexId)> = doc.edges.iter().map(|[a, b]| (VertexId(*a), VertexId(*b))).collect();
    StrategyGraph::from_parts(doc.task_id, doc.iteration_created, vertices, edges)
}
