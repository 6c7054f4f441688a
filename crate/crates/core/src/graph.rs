//! Weighted undirected graphs, sink sets and the flow problems built on them.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ElfsError, Result};

pub type Vertex = usize;
pub type EdgeId = usize;

/// An undirected edge stored with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: Vertex,
    pub v: Vertex,
    pub weight: f64,
}

impl Edge {
    /// The endpoint opposite `x`. Panics if `x` is not an endpoint.
    pub fn other(&self, x: Vertex) -> Vertex {
        if x == self.u {
            self.v
        } else {
            assert_eq!(x, self.v, "vertex {x} is not an endpoint");
            self.u
        }
    }

    pub fn has(&self, x: Vertex) -> bool {
        self.u == x || self.v == x
    }
}

/// A finite, simple, weighted undirected graph on vertices `0..n`.
///
/// Parallel edges passed to the constructors are merged by adding weights.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(Vertex, EdgeId)>>,
    degrees: Vec<f64>,
}

/// On-disk graph format: `{"n": int, "edges": [[u, v, w], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(Vertex, Vertex, f64)>,
}

impl Graph {
    /// Builds a graph on `n` vertices. Rejects self-loops, out-of-range endpoints and
    /// weights that are not strictly positive and finite.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (Vertex, Vertex, f64)>) -> Result<Graph> {
        let mut merged: Vec<Edge> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(ElfsError::VertexOutOfRange { vertex: a.max(b), n });
            }
            if a == b {
                return Err(ElfsError::SelfLoop(a));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(ElfsError::NonPositiveWeight { u: a, v: b, weight: w });
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            match index.get(&(u, v)) {
                Some(&id) => {
                    let e: &mut Edge = &mut merged[id];
                    e.weight += w;
                }
                None => {
                    index.insert((u, v), merged.len());
                    merged.push(Edge { u, v, weight: w });
                }
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut degrees = vec![0.0; n];
        for (id, e) in merged.iter().enumerate() {
            adjacency[e.u].push((e.v, id));
            adjacency[e.v].push((e.u, id));
            degrees[e.u] += e.weight;
            degrees[e.v] += e.weight;
        }
        Ok(Graph { n, edges: merged, adjacency, degrees })
    }

    /// Builds a graph whose vertex count is one more than the largest endpoint.
    pub fn from_edge_list(edges: &[(Vertex, Vertex, f64)]) -> Result<Graph> {
        let n = edges.iter().map(|&(a, b, _)| a.max(b) + 1).max().unwrap_or(0);
        Graph::new(n, edges.iter().copied())
    }

    /// Unit-weight convenience constructor.
    pub fn unweighted(n: usize, edges: &[(Vertex, Vertex)]) -> Result<Graph> {
        Graph::new(n, edges.iter().map(|&(a, b)| (a, b, 1.0)))
    }

    pub fn from_file(file: &GraphFile) -> Result<Graph> {
        Graph::new(file.n, file.edges.iter().copied())
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile { n: self.n, edges: self.edges.iter().map(|e| (e.u, e.v, e.weight)).collect() }
    }

    pub fn from_json(text: &str) -> Result<Graph> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| ElfsError::Parse(e.to_string()))?;
        Graph::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("graph serializes")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    /// Neighbours of `x` together with the connecting edge id.
    pub fn neighbors(&self, x: Vertex) -> &[(Vertex, EdgeId)] {
        &self.adjacency[x]
    }

    pub fn degree(&self, x: Vertex) -> f64 {
        self.degrees[x]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Number of incident edges, ignoring weights.
    pub fn valence(&self, x: Vertex) -> usize {
        self.adjacency[x].len()
    }

    pub fn edge_between(&self, x: Vertex, y: Vertex) -> Option<EdgeId> {
        self.adjacency[x].iter().find(|&&(z, _)| z == y).map(|&(_, id)| id)
    }

    /// Edge weight, or zero when `x` and `y` are not adjacent.
    pub fn weight(&self, x: Vertex, y: Vertex) -> f64 {
        self.edge_between(x, y).map_or(0.0, |id| self.edges[id].weight)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn check_vertex(&self, x: Vertex) -> Result<()> {
        if x < self.n {
            Ok(())
        } else {
            Err(ElfsError::VertexOutOfRange { vertex: x, n: self.n })
        }
    }

    /// Component label of every vertex, labels numbered from zero.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in &self.adjacency[x] {
                    if label[y] == usize::MAX {
                        label[y] = next;
                        queue.push_back(y);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.components().iter().all(|&c| c == 0)
    }

    pub fn is_tree(&self) -> bool {
        self.n > 0 && self.edges.len() + 1 == self.n && self.is_connected()
    }

    /// The combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            l[(e.u, e.v)] -= e.weight;
            l[(e.v, e.u)] -= e.weight;
            l[(e.u, e.u)] += e.weight;
            l[(e.v, e.v)] += e.weight;
        }
        l
    }

    /// Random-walk transition matrix `D^{-1} A`. Isolated vertices get a zero row.
    pub fn walk_matrix(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            p[(e.u, e.v)] += e.weight / self.degrees[e.u];
            p[(e.v, e.u)] += e.weight / self.degrees[e.v];
        }
        p
    }

    /// Collapses the sink set to one vertex (the last id) and drops edges inside it.
    pub fn merge_sink(&self, sink: &SinkSet) -> Result<SinkMerge> {
        let mut map = vec![0; self.n];
        let mut next = 0;
        for x in 0..self.n {
            if !sink.contains(x) {
                map[x] = next;
                next += 1;
            }
        }
        let merged = next;
        for &m in sink.members() {
            map[m] = merged;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| !(sink.contains(e.u) && sink.contains(e.v)))
            .map(|e| (map[e.u], map[e.v], e.weight));
        let graph = Graph::new(merged + 1, edges)?;
        Ok(SinkMerge { graph, merged, map })
    }

    /// Adds a fresh vertex (the returned id, equal to the old `n`) joined to `at`.
    pub fn append_vertex(&self, at: Vertex, weight: f64) -> Result<(Graph, Vertex)> {
        self.check_vertex(at)?;
        let fresh = self.n;
        let edges = self
            .edges
            .iter()
            .map(|e| (e.u, e.v, e.weight))
            .chain(std::iter::once((at, fresh, weight)));
        Ok((Graph::new(self.n + 1, edges)?, fresh))
    }

    /// Subdivides every edge. Edge `e = (u, v, w)` becomes `u - m_e - v` with both halves of
    /// weight `w`, so degrees of the old vertices are unchanged. Returns the midpoint ids.
    pub fn split_edges(&self) -> (Graph, Vec<Vertex>) {
        let n = self.n;
        let mids: Vec<Vertex> = (0..self.edges.len()).map(|i| n + i).collect();
        let edges = self.edges.iter().enumerate().flat_map(|(i, e)| {
            [(e.u, n + i, e.weight), (n + i, e.v, e.weight)]
        });
        let g = Graph::new(n + self.edges.len(), edges).expect("subdivision of a valid graph");
        (g, mids)
    }

    /// Subgraph induced by `keep`, relabelled in the order given.
    pub fn induced(&self, keep: &[Vertex]) -> Result<(Graph, Vec<Option<Vertex>>)> {
        let mut map = vec![None; self.n];
        for (i, &x) in keep.iter().enumerate() {
            self.check_vertex(x)?;
            map[x] = Some(i);
        }
        let edges = self.edges.iter().filter_map(|e| match (map[e.u], map[e.v]) {
            (Some(a), Some(b)) => Some((a, b, e.weight)),
            _ => None,
        });
        Ok((Graph::new(keep.len(), edges)?, map))
    }
}

/// Result of [`Graph::merge_sink`].
#[derive(Clone, Debug)]
pub struct SinkMerge {
    pub graph: Graph,
    /// Id of the merged sink vertex.
    pub merged: Vertex,
    /// Old vertex id to new vertex id.
    pub map: Vec<Vertex>,
}

/// A non-empty set of absorbing vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct SinkSet {
    members: Vec<Vertex>,
    mask: Vec<bool>,
}

impl SinkSet {
    pub fn new(g: &Graph, members: &[Vertex]) -> Result<SinkSet> {
        if members.is_empty() {
            return Err(ElfsError::EmptySink);
        }
        let mut mask = vec![false; g.n()];
        for &m in members {
            g.check_vertex(m)?;
            mask[m] = true;
        }
        if mask.iter().all(|&b| b) {
            return Err(ElfsError::SinkIsWholeGraph);
        }
        let members = (0..g.n()).filter(|&x| mask[x]).collect();
        let set = SinkSet { members, mask };
        // Every component must contain a sink vertex, otherwise the grounded Laplacian
        // is singular.
        let comp = g.components();
        let ncomp = comp.iter().copied().max().map_or(0, |c| c + 1);
        let mut has_sink = vec![false; ncomp];
        for &m in &set.members {
            has_sink[comp[m]] = true;
        }
        if let Some(x) = (0..g.n()).find(|&x| !has_sink[comp[x]]) {
            return Err(ElfsError::Disconnected { vertex: x });
        }
        Ok(set)
    }

    pub fn single(g: &Graph, m: Vertex) -> Result<SinkSet> {
        SinkSet::new(g, &[m])
    }

    pub fn members(&self) -> &[Vertex] {
        &self.members
    }

    pub fn contains(&self, x: Vertex) -> bool {
        self.mask.get(x).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// The non-sink vertices in increasing order.
    pub fn complement(&self) -> Vec<Vertex> {
        (0..self.mask.len()).filter(|&x| !self.mask[x]).collect()
    }
}

/// A validated triple of graph, source and sink.
#[derive(Clone, Debug)]
pub struct FlowProblem<'g> {
    pub graph: &'g Graph,
    pub source: Vertex,
    pub sink: SinkSet,
}

impl<'g> FlowProblem<'g> {
    pub fn new(graph: &'g Graph, source: Vertex, sink: &[Vertex]) -> Result<FlowProblem<'g>> {
        let sink = SinkSet::new(graph, sink)?;
        FlowProblem::with_sink(graph, source, sink)
    }

    pub fn with_sink(graph: &'g Graph, source: Vertex, sink: SinkSet) -> Result<FlowProblem<'g>> {
        graph.check_vertex(source)?;
        if sink.contains(source) {
            return Err(ElfsError::SourceInSink(source));
        }
        Ok(FlowProblem { graph, source, sink })
    }
}
