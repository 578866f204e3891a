//! Shared graph and program data model.
//!
//! A program is a [`ComputationGraph`] (resource units joined by fusions) plus a
//! [`DependencyGraph`] over the same dense node space recording which
//! measurement bases wait on which outcomes. [`ProgramBundle`] ties the two
//! together with provenance metadata and owns the on-disk JSON format.

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node index, `0..n`.
pub type NodeId = usize;

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported bundle version {0}")]
    Version(u32),
    #[error("node ids must be dense 0..n; found id {found} at position {position}")]
    NonDenseIds { position: usize, found: NodeId },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge ({u}, {v}) references undeclared node {missing}")]
    DanglingEdge { u: NodeId, v: NodeId, missing: NodeId },
    #[error("dependency cycle: {}", fmt_cycle(.0))]
    Cycle(Vec<NodeId>),
    #[error("removee node {0} takes part in a dependency edge")]
    RemoveeDependency(NodeId),
    #[error("node {0} has a non-finite angle")]
    NonFiniteAngle(NodeId),
    #[error("graph has {graph} nodes but dependency graph has {deps}")]
    NodeSpaceMismatch { graph: usize, deps: usize },
}

fn fmt_cycle(c: &[NodeId]) -> String {
    let mut s: Vec<String> = c.iter().map(|v| v.to_string()).collect();
    if let Some(first) = c.first() {
        s.push(first.to_string());
    }
    s.join(" -> ")
}

/// Compressed adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct Csr {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl Csr {
    pub(crate) fn build(n: usize, arcs: impl Iterator<Item = (NodeId, NodeId)> + Clone) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for (u, _) in arcs.clone() {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0; offsets[n]];
        for (u, v) in arcs {
            targets[fill[u]] = v;
            fill[u] += 1;
        }
        for u in 0..n {
            targets[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        Csr { offsets, targets }
    }

    #[inline]
    pub(crate) fn row(&self, u: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }
}

/// Undirected graph state: nodes are resource units, edges are fusions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationGraph {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    wires: Vec<Option<u32>>,
    adj: Csr,
}

impl ComputationGraph {
    /// Builds a graph over `0..n`. Edges are stored as `(min, max)` in
    /// ascending order; self-loops, duplicates and dangling endpoints are
    /// rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(ModelError::DanglingEdge { u, v, missing: if u >= n { u } else { v } });
            }
            if u == v {
                return Err(ModelError::SelfLoop(u));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(ModelError::DuplicateEdge(e.0, e.1));
            }
        }
        let edges: Vec<_> = seen.into_iter().collect();
        let adj = Csr::build(n, edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)]));
        Ok(ComputationGraph { n, edges, wires: vec![None; n], adj })
    }

    pub fn with_wires(mut self, wires: Vec<Option<u32>>) -> Self {
        assert_eq!(wires.len(), self.n, "one wire label per node");
        self.wires = wires;
        self
    }

    pub fn empty() -> Self {
        ComputationGraph { n: 0, edges: Vec::new(), wires: Vec::new(), adj: Csr::build(0, std::iter::empty()) }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted ascending.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        self.adj.row(u)
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adj.row(u).len()
    }

    pub fn wire(&self, u: NodeId) -> Option<u32> {
        self.wires[u]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj.row(u).binary_search(&v).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Measured in an adaptive basis; may wait on classical outcomes.
    Measuree,
    /// Discarded by a Z measurement; never waits.
    Removee,
}

/// Per-node measurement data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub role: Role,
    /// Measurement angle in radians.
    pub angle: f64,
}

impl Measurement {
    pub fn measuree(angle: f64) -> Self {
        Measurement { role: Role::Measuree, angle }
    }

    pub fn removee() -> Self {
        Measurement { role: Role::Removee, angle: 0.0 }
    }
}

/// Real-time X-dependencies: an arc `(u, v)` means the basis of `v` waits on
/// the outcome of `u`. Always acyclic.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyGraph {
    nodes: Vec<Measurement>,
    edges: Vec<(NodeId, NodeId)>,
    parents: Csr,
    children: Csr,
}

impl DependencyGraph {
    pub fn new(
        nodes: Vec<Measurement>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, ModelError> {
        let n = nodes.len();
        for (i, m) in nodes.iter().enumerate() {
            if !m.angle.is_finite() {
                return Err(ModelError::NonFiniteAngle(i));
            }
        }
        let mut seen = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(ModelError::DanglingEdge { u, v, missing: if u >= n { u } else { v } });
            }
            if u == v {
                return Err(ModelError::Cycle(vec![u]));
            }
            for w in [u, v] {
                if nodes[w].role == Role::Removee {
                    return Err(ModelError::RemoveeDependency(w));
                }
            }
            if !seen.insert((u, v)) {
                return Err(ModelError::DuplicateEdge(u, v));
            }
        }
        let edges: Vec<_> = seen.into_iter().collect();
        let parents = Csr::build(n, edges.iter().map(|&(u, v)| (v, u)));
        let children = Csr::build(n, edges.iter().copied());
        let deps = DependencyGraph { nodes, edges, parents, children };
        deps.topo_sort()?;
        Ok(deps)
    }

    /// All nodes measurees at angle 0, no arcs.
    pub fn unconstrained(n: usize) -> Self {
        DependencyGraph::new(vec![Measurement::measuree(0.0); n], std::iter::empty())
            .expect("arc-free graph is valid")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn measurement(&self, u: NodeId) -> Measurement {
        self.nodes[u]
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.nodes
    }

    pub fn is_removee(&self, u: NodeId) -> bool {
        self.nodes[u].role == Role::Removee
    }

    pub fn parents(&self, u: NodeId) -> &[NodeId] {
        self.parents.row(u)
    }

    pub fn children(&self, u: NodeId) -> &[NodeId] {
        self.children.row(u)
    }

    /// Kahn's algorithm, always releasing the smallest ready id first.
    pub fn topo_sort(&self) -> Result<Vec<NodeId>, ModelError> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = (0..n).map(|u| self.parents(u).len()).collect();
        let mut ready: BinaryHeap<Reverse<NodeId>> =
            (0..n).filter(|&u| indeg[u] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(u)) = ready.pop() {
            order.push(u);
            for &c in self.children(u) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(ModelError::Cycle(self.witness_cycle(&indeg)))
        }
    }

    /// Walks parent links among the nodes Kahn could not release; every such
    /// node has a remaining parent, so the walk must revisit a node.
    fn witness_cycle(&self, indeg: &[usize]) -> Vec<NodeId> {
        let stuck = |u: NodeId| indeg[u] > 0;
        let start = (0..indeg.len()).find(|&u| stuck(u)).expect("cycle exists");
        let mut pos = vec![usize::MAX; indeg.len()];
        let mut path = Vec::new();
        let mut u = start;
        while pos[u] == usize::MAX {
            pos[u] = path.len();
            path.push(u);
            u = *self.parents(u).iter().find(|&&p| stuck(p)).expect("stuck node has stuck parent");
        }
        let mut cycle = path.split_off(pos[u]);
        cycle.reverse();
        // rotate so the smallest id leads
        let min_at = cycle.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i).unwrap_or(0);
        cycle.rotate_left(min_at);
        cycle
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub name: String,
    pub qubits: usize,
    pub seed: u64,
    pub generator: String,
}

/// Compiler input: graph state, dependency DAG and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramBundle {
    pub meta: BundleMeta,
    pub graph: ComputationGraph,
    pub deps: DependencyGraph,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: NodeId,
    role: Role,
    angle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wire: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    version: u32,
    meta: BundleMeta,
    nodes: Vec<NodeRecord>,
    edges: Vec<(NodeId, NodeId)>,
    deps: Vec<(NodeId, NodeId)>,
}

impl ProgramBundle {
    pub fn new(meta: BundleMeta, graph: ComputationGraph, deps: DependencyGraph) -> Result<Self, ModelError> {
        if graph.node_count() != deps.node_count() {
            return Err(ModelError::NodeSpaceMismatch { graph: graph.node_count(), deps: deps.node_count() });
        }
        Ok(ProgramBundle { meta, graph, deps })
    }

    pub fn to_json(&self) -> String {
        let file = BundleFile {
            version: BUNDLE_VERSION,
            meta: self.meta.clone(),
            nodes: (0..self.graph.node_count())
                .map(|id| {
                    let m = self.deps.measurement(id);
                    NodeRecord { id, role: m.role, angle: m.angle, wire: self.graph.wire(id) }
                })
                .collect(),
            edges: self.graph.edges().to_vec(),
            deps: self.deps.edges().to_vec(),
        };
        let mut s = serde_json::to_string(&file).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: BundleFile = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        if file.version != BUNDLE_VERSION {
            return Err(ModelError::Version(file.version));
        }
        for (position, rec) in file.nodes.iter().enumerate() {
            if rec.id != position {
                return Err(ModelError::NonDenseIds { position, found: rec.id });
            }
        }
        let n = file.nodes.len();
        let wires = file.nodes.iter().map(|r| r.wire).collect();
        let graph = ComputationGraph::new(n, file.edges)?.with_wires(wires);
        let measurements = file.nodes.iter().map(|r| Measurement { role: r.role, angle: r.angle }).collect();
        let deps = DependencyGraph::new(measurements, file.deps)?;
        ProgramBundle::new(file.meta, graph, deps)
    }
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ProgramBundle, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    ProgramBundle::from_json(&text)
}

pub fn save_bundle(bundle: &ProgramBundle, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, bundle.to_json()).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}

/// Free-function form of [`DependencyGraph::topo_sort`].
pub fn topo_sort(deps: &DependencyGraph) -> Result<Vec<NodeId>, ModelError> {
    deps.topo_sort()
}
