//! Strategy graphs: DAGs whose vertices carry label functions. Every
//! source→sink path is one known way of solving a task.

mod export;
mod score;

pub use export::{export_graph, import_graph, GraphFormat};
pub use score::{best_path, categorize, categorize_with, score_path, score_path_with, Category, ScoringMode};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{LabelFunction, PredicateRuntimeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("no label functions given")]
    EmptyLabelSet,
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("cycle detected in strategy graph")]
    CycleDetected,
    #[error("vertex {vertex}: {source}")]
    Evaluation { vertex: VertexId, source: PredicateRuntimeError },
    #[error("graph format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    pub vertex_ids: Vec<VertexId>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct StrategyGraph {
    pub task_id: String,
    pub iteration_created: u32,
    vertices: BTreeMap<VertexId, LabelFunction>,
    edges: BTreeSet<(VertexId, VertexId)>,
}

impl PartialEq for StrategyGraph {
    /// Structural equality: task, vertex ids, guard sequences and edges.
    fn eq(&self, other: &Self) -> bool {
        self.task_id == other.task_id
            && self.edges == other.edges
            && self.vertices.len() == other.vertices.len()
            && self
                .vertices
                .iter()
                .zip(&other.vertices)
                .all(|((a, la), (b, lb))| a == b && la.guards == lb.guards)
    }
}

impl StrategyGraph {
    pub fn empty(task_id: impl Into<String>, iteration_created: u32) -> Self {
        StrategyGraph { task_id: task_id.into(), iteration_created, vertices: BTreeMap::new(), edges: BTreeSet::new() }
    }

    /// Builds a graph from explicit parts; fails on dangling edges or cycles.
    pub fn from_parts(
        task_id: impl Into<String>,
        iteration_created: u32,
        vertices: BTreeMap<VertexId, LabelFunction>,
        edges: BTreeSet<(VertexId, VertexId)>,
    ) -> Result<Self, GraphError> {
        for (a, b) in &edges {
            if !vertices.contains_key(a) || !vertices.contains_key(b) {
                return Err(GraphError::Format(format!("edge {a}->{b} references a missing vertex")));
            }
        }
        let g = StrategyGraph { task_id: task_id.into(), iteration_created, vertices, edges };
        g.topo_order()?;
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = (VertexId, &LabelFunction)> {
        self.vertices.iter().map(|(id, lf)| (*id, lf))
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn label(&self, id: VertexId) -> Option<&LabelFunction> {
        self.vertices.get(&id)
    }

    pub fn has_edge(&self, from: VertexId, to: VertexId) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn successors(&self, id: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.edges.range((id, VertexId(0))..=(id, VertexId(u32::MAX))).map(|(_, b)| *b)
    }

    pub fn in_degree(&self, id: VertexId) -> usize {
        self.edges.iter().filter(|(_, b)| *b == id).count()
    }

    pub fn out_degree(&self, id: VertexId) -> usize {
        self.successors(id).count()
    }

    pub fn sources(&self) -> Vec<VertexId> {
        let targets: BTreeSet<VertexId> = self.edges.iter().map(|(_, b)| *b).collect();
        self.vertices.keys().copied().filter(|v| !targets.contains(v)).collect()
    }

    pub fn sinks(&self) -> Vec<VertexId> {
        let origins: BTreeSet<VertexId> = self.edges.iter().map(|(a, _)| *a).collect();
        self.vertices.keys().copied().filter(|v| !origins.contains(v)).collect()
    }

    fn next_id(&self) -> VertexId {
        VertexId(self.vertices.keys().next_back().map_or(0, |v| v.0 + 1))
    }

    fn add_vertex(&mut self, lf: LabelFunction) -> VertexId {
        let id = self.next_id();
        self.vertices.insert(id, lf);
        id
    }

    /// Kahn's algorithm, smallest ready id first.
    pub fn topo_order(&self) -> Result<Vec<VertexId>, GraphError> {
        let mut indeg: BTreeMap<VertexId, usize> = self.vertices.keys().map(|v| (*v, 0)).collect();
        for (_, b) in &self.edges {
            *indeg.get_mut(b).expect("edge endpoint exists") += 1;
        }
        let mut ready: BTreeSet<VertexId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(v, _)| *v).collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for s in self.successors(v) {
                let d = indeg.get_mut(&s).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(s);
                }
            }
        }
        if order.len() != self.vertices.len() {
            return Err(GraphError::CycleDetected);
        }
        Ok(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_ok()
    }

    fn reaches(&self, from: VertexId, to: VertexId) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if seen.insert(v) {
                stack.extend(self.successors(v));
            }
        }
        false
    }

    /// Whether inserting `from → to` would close a cycle.
    fn edge_would_cycle(&self, from: VertexId, to: VertexId) -> bool {
        from == to || self.reaches(to, from)
    }

    /// A source→sink path whose label functions match `lfs` canonically.
    pub fn find_path(&self, lfs: &[LabelFunction]) -> Option<Path> {
        let sinks: BTreeSet<VertexId> = self.sinks().into_iter().collect();
        let mut stack: Vec<Vec<VertexId>> = self
            .sources()
            .into_iter()
            .filter(|v| lfs.first().is_some_and(|lf| self.vertices[v].same_canonical(lf)))
            .map(|v| vec![v])
            .collect();
        while let Some(prefix) = stack.pop() {
            let last = *prefix.last().unwrap();
            if prefix.len() == lfs.len() {
                if sinks.contains(&last) {
                    return Some(Path { vertex_ids: prefix });
                }
                continue;
            }
            let want = &lfs[prefix.len()];
            for s in self.successors(last) {
                if self.vertices[&s].same_canonical(want) {
                    let mut next = prefix.clone();
                    next.push(s);
                    stack.push(next);
                }
            }
        }
        None
    }
}

/// A chain `v1 → v2 → … → vK` in list order.
pub fn init_linear(lfs: &[LabelFunction], task_id: &str, iteration: u32) -> Result<StrategyGraph, GraphError> {
    if lfs.is_empty() {
        return Err(GraphError::EmptyLabelSet);
    }
    let mut g = StrategyGraph::empty(task_id, iteration);
    let mut prev = None;
    for lf in lfs {
        let id = g.add_vertex(lf.clone());
        if let Some(p) = prev {
            g.edges.insert((p, id));
        }
        prev = Some(id);
    }
    Ok(g)
}

/// All source→sink paths, ordered lexicographically by vertex-id sequence.
pub fn enumerate_paths(g: &StrategyGraph) -> Result<Vec<Path>, GraphError> {
    g.topo_order()?;
    let mut out = Vec::new();
    let mut stack: Vec<VertexId> = Vec::new();
    fn walk(g: &StrategyGraph, v: VertexId, stack: &mut Vec<VertexId>, out: &mut Vec<Path>) {
        stack.push(v);
        let mut any = false;
        for s in g.successors(v) {
            any = true;
            walk(g, s, stack, out);
        }
        if !any {
            out.push(Path { vertex_ids: stack.clone() });
        }
        stack.pop();
    }
    for s in g.sources() {
        walk(g, s, &mut stack, &mut out);
    }
    Ok(out)
}

/// Number of source→sink paths by dynamic programming over a topological order.
pub fn path_count(g: &StrategyGraph) -> Result<u64, GraphError> {
    let order = g.topo_order()?;
    let mut ways: BTreeMap<VertexId, u64> = BTreeMap::new();
    for v in &order {
        if g.in_degree(*v) == 0 {
            ways.insert(*v, 1);
        }
    }
    let mut total = 0u64;
    for v in order {
        let w = ways.get(&v).copied().unwrap_or(0);
        let mut any = false;
        for s in g.successors(v) {
            any = true;
            *ways.entry(s).or_insert(0) += w;
        }
        if !any {
            total += w;
        }
    }
    Ok(total)
}

/// Merges a newly discovered successful strategy into the graph.
///
/// Returns `g` unchanged when `env_success` is false or when the path is
/// already present. Otherwise each label function reuses a canonically equal
/// vertex that can take its position without breaking an existing
/// strategy: the first vertex only merges with a non-sink source, the last
/// with a non-source sink, inner vertices with inner vertices. Sources never
/// gain in-edges and sinks never gain out-edges, so every existing path
/// survives and the new path is itself source→sink. If an edge would close
/// a cycle, the destination is duplicated under a fresh id.
pub fn expand(g: &StrategyGraph, new_path_lfs: &[LabelFunction], env_success: bool) -> Result<StrategyGraph, GraphError> {
    if new_path_lfs.is_empty() {
        return Err(GraphError::EmptyLabelSet);
    }
    if !env_success || g.find_path(new_path_lfs).is_some() {
        return Ok(g.clone());
    }
    let mut out = g.clone();
    let n = new_path_lfs.len();
    let roles: BTreeMap<VertexId, (bool, bool)> =
        g.vertices.keys().map(|v| (*v, (g.in_degree(*v) == 0, g.out_degree(*v) == 0))).collect();
    let eligible = |v: VertexId, pos: usize| -> bool {
        let (is_source, is_sink) = roles[&v];
        match (pos == 0, pos + 1 == n) {
            (true, true) => is_source && is_sink,
            (true, false) => is_source && !is_sink,
            (false, true) => is_sink && !is_source,
            (false, false) => !is_source && !is_sink,
        }
    };

    let mut prev: Option<VertexId> = None;
    for (pos, lf) in new_path_lfs.iter().enumerate() {
        let candidates: Vec<VertexId> = g
            .vertices
            .iter()
            .filter(|(v, existing)| eligible(**v, pos) && existing.same_canonical(lf))
            .map(|(v, _)| *v)
            .collect();
        let chosen = match prev {
            None => candidates.first().copied(),
            Some(p) => candidates
                .iter()
                .copied()
                .find(|c| out.has_edge(p, *c))
                .or_else(|| candidates.iter().copied().find(|c| !out.edge_would_cycle(p, *c))),
        };
        let v = match chosen {
            Some(v) => v,
            None if candidates.is_empty() => out.add_vertex(lf.clone()),
            // every canonical match would close a cycle: duplicate it
            None => {
                let template = out.vertices[&candidates[0]].clone();
                out.add_vertex(template)
            }
        };
        if let Some(p) = prev {
            out.edges.insert((p, v));
        }
        prev = Some(v);
    }
    debug_assert!(out.is_acyclic());
    if !out.is_acyclic() {
        return Err(GraphError::CycleDetected);
    }
    Ok(out)
}
