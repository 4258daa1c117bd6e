//! Metagraph sketches and a priori activation traces.
//!
//! A metagraph has one meta-vertex per subgraph, i.e. per weakly connected
//! component of the graph restricted to one partition, and one meta-edge per
//! ordered pair of subgraphs joined by remote edges. A BFS over the metagraph
//! from the source's subgraph predicts which subgraphs a subgraph-centric BFS
//! touches in each superstep; a linear per-subgraph cost turns that forecast
//! into a [`TimingTrace`].

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Millis, TimingTrace, TraceError};

pub type VertexId = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetagraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("vertex {0} has no partition assignment")]
    UnpartitionedVertex(VertexId),
    #[error("vertex {vertex} assigned to both {first:?} and {second:?}")]
    ConflictingPartition {
        vertex: VertexId,
        first: String,
        second: String,
    },
    #[error("unknown source subgraph {0}")]
    UnknownSource(usize),
    #[error("unknown source vertex {0}")]
    UnknownVertex(VertexId),
    #[error("invalid estimator: {0}")]
    InvalidEstimator(String),
    #[error("malformed metagraph document at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid metagraph: {0}")]
    Invalid(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Assignment of vertices to named partitions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionMap {
    of: HashMap<VertexId, String>,
}

impl PartitionMap {
    pub fn new() -> Self {
        PartitionMap::default()
    }

    pub fn insert(&mut self, vertex: VertexId, partition: &str) -> Result<(), MetagraphError> {
        match self.of.get(&vertex) {
            Some(existing) if existing != partition => Err(MetagraphError::ConflictingPartition {
                vertex,
                first: existing.clone(),
                second: partition.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                self.of.insert(vertex, partition.to_string());
                Ok(())
            }
        }
    }

    /// Parses `vertex partition_id` lines. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, MetagraphError> {
        let mut map = PartitionMap::new();
        for (lineno, line) in data_lines(text) {
            let mut fields = line.split_whitespace();
            let (Some(v), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(MetagraphError::Parse {
                    line: lineno,
                    message: "expected `vertex partition_id`".into(),
                });
            };
            map.insert(parse_vertex(v, lineno)?, p)?;
        }
        Ok(map)
    }

    /// Demo partitioner: vertex `v` goes to partition `v mod k`.
    pub fn hashed(vertices: impl IntoIterator<Item = VertexId>, k: u64) -> Self {
        assert!(k > 0, "need at least one partition");
        let of = vertices
            .into_iter()
            .map(|v| (v, (v % k).to_string()))
            .collect();
        PartitionMap { of }
    }

    pub fn partition_of(&self, vertex: VertexId) -> Option<&str> {
        self.of.get(&vertex).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.of.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.of.keys().copied()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_vertex(field: &str, line: usize) -> Result<VertexId, MetagraphError> {
    field.parse().map_err(|_| MetagraphError::Parse {
        line,
        message: format!("invalid vertex id {field:?}"),
    })
}

/// Parses whitespace-separated `u v` pairs, one per line.
pub fn parse_edge_list(text: &str) -> Result<Vec<(VertexId, VertexId)>, MetagraphError> {
    data_lines(text)
        .map(|(lineno, line)| {
            let mut fields = line.split_whitespace();
            match (fields.next(), fields.next(), fields.next()) {
                (Some(u), Some(v), None) => {
                    Ok((parse_vertex(u, lineno)?, parse_vertex(v, lineno)?))
                }
                _ => Err(MetagraphError::Parse {
                    line: lineno,
                    message: "expected `u v`".into(),
                }),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaVertex {
    pub subgraph_id: usize,
    pub partition_id: String,
    pub local_vertex_count: u64,
    pub local_edge_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaEdge {
    pub from_subgraph: usize,
    pub to_subgraph: usize,
    pub remote_edge_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metagraph {
    /// Indexed by subgraph id.
    pub meta_vertices: Vec<MetaVertex>,
    pub meta_edges: Vec<MetaEdge>,
    #[serde(skip)]
    vertex_subgraph: HashMap<VertexId, usize>,
}

impl Metagraph {
    /// Builds a metagraph from explicit parts, checking ids and edges.
    pub fn from_parts(
        meta_vertices: Vec<MetaVertex>,
        meta_edges: Vec<MetaEdge>,
    ) -> Result<Self, MetagraphError> {
        for (k, mv) in meta_vertices.iter().enumerate() {
            if mv.subgraph_id != k {
                return Err(MetagraphError::Invalid(format!(
                    "meta_vertices[{k}] has subgraph_id {}",
                    mv.subgraph_id
                )));
            }
        }
        for (k, e) in meta_edges.iter().enumerate() {
            let n = meta_vertices.len();
            if e.from_subgraph >= n || e.to_subgraph >= n {
                return Err(MetagraphError::Invalid(format!(
                    "meta_edges[{k}] references a missing subgraph"
                )));
            }
            if e.from_subgraph == e.to_subgraph {
                return Err(MetagraphError::Invalid(format!(
                    "meta_edges[{k}] is a self-loop"
                )));
            }
            if e.remote_edge_count == 0 {
                return Err(MetagraphError::Invalid(format!(
                    "meta_edges[{k}] has no remote edges"
                )));
            }
        }
        Ok(Metagraph {
            meta_vertices,
            meta_edges,
            vertex_subgraph: HashMap::new(),
        })
    }

    pub fn load<R: Read>(source: R) -> Result<Self, MetagraphError> {
        let raw: Metagraph =
            serde_json::from_reader(source).map_err(|e| MetagraphError::Malformed {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        Metagraph::from_parts(raw.meta_vertices, raw.meta_edges)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)
    }

    pub fn num_subgraphs(&self) -> usize {
        self.meta_vertices.len()
    }

    /// Subgraph holding `vertex`; only known for metagraphs built from a graph.
    pub fn subgraph_of(&self, vertex: VertexId) -> Option<usize> {
        self.vertex_subgraph.get(&vertex).copied()
    }

    /// Partition ids in order of their first subgraph.
    pub fn partition_ids(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.meta_vertices
            .iter()
            .filter(|mv| seen.insert(mv.partition_id.as_str()))
            .map(|mv| mv.partition_id.clone())
            .collect()
    }

    /// Neighbour lists; with `directed` only along `from -> to`.
    fn adjacency(&self, directed: bool) -> Vec<Vec<usize>> {
        let mut adj = vec![BTreeSet::new(); self.num_subgraphs()];
        for e in &self.meta_edges {
            adj[e.from_subgraph].insert(e.to_subgraph);
            if !directed {
                adj[e.to_subgraph].insert(e.from_subgraph);
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Splits every partition into weakly connected subgraphs and bundles the
/// remote edges between them.
///
/// The vertex set is every vertex of `partitions` plus every edge endpoint;
/// each must have a partition. Subgraph ids follow the smallest vertex id in
/// each subgraph.
pub fn build_metagraph(
    edges: &[(VertexId, VertexId)],
    partitions: &PartitionMap,
) -> Result<Metagraph, MetagraphError> {
    let mut vertices: BTreeSet<VertexId> = partitions.vertices().collect();
    for &(u, v) in edges {
        vertices.insert(u);
        vertices.insert(v);
    }
    let vertices: Vec<VertexId> = vertices.into_iter().collect();
    let index: HashMap<VertexId, usize> =
        vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut part = Vec::with_capacity(vertices.len());
    for &v in &vertices {
        part.push(
            partitions
                .partition_of(v)
                .ok_or(MetagraphError::UnpartitionedVertex(v))?,
        );
    }

    let mut sets = DisjointSets::new(vertices.len());
    for &(u, v) in edges {
        let (a, b) = (index[&u], index[&v]);
        if part[a] == part[b] {
            sets.union(a, b);
        }
    }

    // Roots are the smallest member, and vertices are sorted, so numbering
    // roots in vertex order numbers subgraphs by their smallest vertex.
    let mut subgraph_of_root = HashMap::new();
    let mut meta_vertices: Vec<MetaVertex> = Vec::new();
    let mut sg = vec![0usize; vertices.len()];
    for k in 0..vertices.len() {
        let root = sets.find(k);
        let id = *subgraph_of_root.entry(root).or_insert_with(|| {
            meta_vertices.push(MetaVertex {
                subgraph_id: meta_vertices.len(),
                partition_id: part[k].to_string(),
                local_vertex_count: 0,
                local_edge_count: 0,
            });
            meta_vertices.len() - 1
        });
        sg[k] = id;
        meta_vertices[id].local_vertex_count += 1;
    }

    let mut remote: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for &(u, v) in edges {
        let (a, b) = (index[&u], index[&v]);
        if part[a] == part[b] {
            meta_vertices[sg[a]].local_edge_count += 1;
        } else {
            *remote.entry((sg[a], sg[b])).or_default() += 1;
        }
    }
    let meta_edges = remote
        .into_iter()
        .map(|((from, to), count)| MetaEdge {
            from_subgraph: from,
            to_subgraph: to,
            remote_edge_count: count,
        })
        .collect();

    Ok(Metagraph {
        meta_vertices,
        meta_edges,
        vertex_subgraph: vertices.iter().zip(sg).map(|(&v, id)| (v, id)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RevisitMode {
    /// A subgraph is active only in the superstep it is first reached.
    #[default]
    FirstVisitOnly,
    /// A subgraph already visited is active again in superstep `d + 1` when a
    /// neighbour was first reached at depth `d` (it receives that
    /// neighbour's messages).
    FrontierRevisit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForecastOptions {
    pub revisit: RevisitMode,
    /// Follow meta-edges only in their stored direction.
    pub directed: bool,
    pub max_supersteps: Option<usize>,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        ForecastOptions {
            revisit: RevisitMode::FirstVisitOnly,
            directed: false,
            max_supersteps: None,
        }
    }
}

/// Which subgraphs are active in which superstep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActivationForecast {
    /// Superstep of first activation per subgraph; `None` if never reached
    /// within the forecast.
    pub first_visit: Vec<Option<usize>>,
    pub active_sets: Vec<BTreeSet<usize>>,
}

impl ActivationForecast {
    pub fn num_supersteps(&self) -> usize {
        self.active_sets.len()
    }

    pub fn active_partitions(&self, mg: &Metagraph, superstep: usize) -> BTreeSet<String> {
        self.active_sets[superstep]
            .iter()
            .map(|&g| mg.meta_vertices[g].partition_id.clone())
            .collect()
    }
}

/// BFS over the metagraph from `source`: depth `d` is superstep `d`.
pub fn predict_activation(
    mg: &Metagraph,
    source: usize,
    options: &ForecastOptions,
) -> Result<ActivationForecast, MetagraphError> {
    if source >= mg.num_subgraphs() {
        return Err(MetagraphError::UnknownSource(source));
    }
    let adj = mg.adjacency(options.directed);
    let mut depth: Vec<Option<usize>> = vec![None; mg.num_subgraphs()];
    depth[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(g) = queue.pop_front() {
        let d = depth[g].expect("queued subgraphs have a depth");
        for &h in &adj[g] {
            if depth[h].is_none() {
                depth[h] = Some(d + 1);
                queue.push_back(h);
            }
        }
    }

    let max_depth = depth.iter().flatten().copied().max().unwrap_or(0);
    let mut active_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); max_depth + 2];
    for (g, d) in depth.iter().enumerate() {
        if let Some(d) = d {
            active_sets[*d].insert(g);
        }
    }
    if options.revisit == RevisitMode::FrontierRevisit {
        for (h, dh) in depth.iter().enumerate() {
            let Some(dh) = *dh else { continue };
            for &g in &adj[h] {
                if depth[g].is_some_and(|dg| dg <= dh) {
                    active_sets[dh + 1].insert(g);
                }
            }
        }
    }
    while active_sets.last().is_some_and(BTreeSet::is_empty) {
        active_sets.pop();
    }
    let mut first_visit = depth;
    if let Some(limit) = options.max_supersteps {
        active_sets.truncate(limit.max(1));
        let kept = active_sets.len();
        for fv in &mut first_visit {
            if fv.is_some_and(|d| d >= kept) {
                *fv = None;
            }
        }
    }
    Ok(ActivationForecast {
        first_visit,
        active_sets,
    })
}

/// Linear stand-in for the cost of a local BFS on one subgraph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimator {
    /// Seconds per local vertex.
    pub alpha_per_vertex: f64,
    /// Seconds per local edge.
    pub beta_per_edge: f64,
    /// Share of the first-visit cost paid on a revisit.
    pub revisit_fraction: f64,
}

impl CostEstimator {
    pub fn new(
        alpha_per_vertex: f64,
        beta_per_edge: f64,
        revisit_fraction: f64,
    ) -> Result<Self, MetagraphError> {
        for (name, value) in [("alpha", alpha_per_vertex), ("beta", beta_per_edge)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(MetagraphError::InvalidEstimator(format!(
                    "{name} must be a nonnegative number, got {value}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&revisit_fraction) {
            return Err(MetagraphError::InvalidEstimator(format!(
                "revisit fraction must lie in [0, 1], got {revisit_fraction}"
            )));
        }
        if alpha_per_vertex == 0.0 && beta_per_edge == 0.0 {
            return Err(MetagraphError::InvalidEstimator(
                "alpha and beta are both zero; every subgraph would cost nothing".into(),
            ));
        }
        Ok(CostEstimator {
            alpha_per_vertex,
            beta_per_edge,
            revisit_fraction,
        })
    }

    fn seconds(&self, mv: &MetaVertex) -> f64 {
        self.alpha_per_vertex * mv.local_vertex_count as f64
            + self.beta_per_edge * mv.local_edge_count as f64
    }

    /// First-visit cost, at least 1 ms so a reached subgraph is never
    /// mistaken for an inactive one.
    pub fn first_visit(&self, mv: &MetaVertex) -> Millis {
        Millis(to_millis(self.seconds(mv)).max(1))
    }

    pub fn revisit(&self, mv: &MetaVertex) -> Millis {
        Millis(to_millis(self.revisit_fraction * self.seconds(mv)))
    }
}

impl Default for CostEstimator {
    /// 1 µs per vertex and per edge; arbitrary placeholders.
    fn default() -> Self {
        CostEstimator {
            alpha_per_vertex: 1e-6,
            beta_per_edge: 1e-6,
            revisit_fraction: 0.1,
        }
    }
}

fn to_millis(secs: f64) -> u64 {
    // Absorb float noise such as 0.003 * 1000 = 3.0000000000000004.
    (secs * 1000.0 - 1e-9).ceil().max(0.0) as u64
}

/// Default bytes per local edge when sizing partitions.
pub const DEFAULT_BYTES_PER_EDGE: u64 = 16;

/// Sums estimated subgraph costs into per-partition superstep times.
/// Trailing supersteps with no cost are dropped.
pub fn synthesize_trace(
    mg: &Metagraph,
    forecast: &ActivationForecast,
    estimator: &CostEstimator,
    bytes_per_edge: u64,
) -> Result<TimingTrace, MetagraphError> {
    let ids = mg.partition_ids();
    let row_of: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();
    let mut times = vec![vec![Millis::ZERO; forecast.num_supersteps()]; ids.len()];
    let mut sizes = vec![0u64; ids.len()];
    for mv in &mg.meta_vertices {
        sizes[row_of[mv.partition_id.as_str()]] += bytes_per_edge * mv.local_edge_count;
    }
    for (s, active) in forecast.active_sets.iter().enumerate() {
        for &g in active {
            let mv = &mg.meta_vertices[g];
            let cost = if forecast.first_visit[g] == Some(s) {
                estimator.first_visit(mv)
            } else {
                estimator.revisit(mv)
            };
            times[row_of[mv.partition_id.as_str()]][s] += cost;
        }
    }
    let keep = (0..forecast.num_supersteps())
        .rev()
        .find(|&s| times.iter().any(|r| !r[s].is_zero()))
        .map_or(0, |s| s + 1);
    for row in &mut times {
        row.truncate(keep);
    }
    Ok(TimingTrace::new(ids, times, Some(sizes))?)
}
