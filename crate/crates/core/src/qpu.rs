//! Single-QPU stage: packs one part of the computation graph into
//! capacity-bounded execution layers.
//!
//! Placement and routing inside a layer are not modelled. A layer holds at most
//! `⌊ρ·L²⌋` nodes of an `L×L` grid, the fill factor `ρ` standing in for routing
//! overhead. Other single-QPU compilers plug in through [`LayerAssembler`].

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::{ComputationGraph, DependencyGraph, NodeId};
use crate::partition::PartitionResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub side: usize,
    pub fill_factor: f64,
}

impl GridSpec {
    pub const DEFAULT_FILL: f64 = 0.5;

    pub fn new(side: usize, fill_factor: f64) -> Self {
        assert!(side >= 1, "grid side must be positive");
        assert!(fill_factor > 0.0 && fill_factor <= 1.0, "fill factor must lie in (0, 1]");
        GridSpec { side, fill_factor }
    }

    /// Nodes per execution layer, never below one.
    pub fn capacity(&self) -> usize {
        ((self.fill_factor * (self.side * self.side) as f64 + 1e-9).floor() as usize).max(1)
    }
}

/// Grid side `2·⌈√qubits⌉ − 1` at the default fill factor.
pub fn default_grid(qubits: usize) -> GridSpec {
    let mut r = (qubits as f64).sqrt() as usize;
    while r * r < qubits {
        r += 1;
    }
    GridSpec::new((2 * r).saturating_sub(1).max(1), GridSpec::DEFAULT_FILL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Bfs,
    #[default]
    CuthillMckee,
}

impl std::str::FromStr for Ordering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bfs" => Ok(Ordering::Bfs),
            "cuthill_mckee" | "rcm" => Ok(Ordering::CuthillMckee),
            _ => Err(format!("unknown ordering {s:?} (expected bfs or cuthill_mckee)")),
        }
    }
}

/// One part of a partition, with its intra-part edges and incident cut edges.
#[derive(Debug, Clone, PartialEq)]
pub struct QpuSubgraph {
    pub qpu: usize,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub cut: Vec<(NodeId, NodeId)>,
}

impl QpuSubgraph {
    pub fn extract(graph: &ComputationGraph, partition: &PartitionResult, qpu: usize) -> Self {
        let a = &partition.assignment;
        let nodes = partition.members(qpu);
        let mut edges = Vec::new();
        let mut cut = Vec::new();
        for &(u, v) in graph.edges() {
            match (a[u] == qpu, a[v] == qpu) {
                (true, true) => edges.push((u, v)),
                (true, false) | (false, true) => cut.push((u, v)),
                _ => {}
            }
        }
        QpuSubgraph { qpu, nodes, edges, cut }
    }

    /// The whole graph as a single part.
    pub fn whole(graph: &ComputationGraph) -> Self {
        QpuSubgraph {
            qpu: 0,
            nodes: (0..graph.node_count()).collect(),
            edges: graph.edges().to_vec(),
            cut: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuseePair {
    pub u: NodeId,
    pub v: NodeId,
    pub layer_u: usize,
    pub layer_v: usize,
}

impl FuseePair {
    pub fn gap(&self) -> usize {
        self.layer_u.abs_diff(self.layer_v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connector {
    pub edge: (NodeId, NodeId),
    pub local: NodeId,
    pub layer: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionPlan {
    pub qpu: usize,
    pub layers: Vec<Vec<NodeId>>,
    pub node_layer: BTreeMap<NodeId, usize>,
    pub fusee_pairs: Vec<FuseePair>,
    pub connectors: Vec<Connector>,
}

#[derive(Serialize, Deserialize)]
struct ConnectorRecord {
    edge: [NodeId; 2],
    local: NodeId,
    layer: usize,
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    qpu: usize,
    layers: Vec<Vec<NodeId>>,
    fusees: Vec<[usize; 4]>,
    connectors: Vec<ConnectorRecord>,
}

impl ExecutionPlan {
    /// Derives layer lookups, fusee pairs and connectors from a layer list.
    pub fn from_layers(sub: &QpuSubgraph, layers: Vec<Vec<NodeId>>) -> Self {
        let node_layer: BTreeMap<NodeId, usize> =
            layers.iter().enumerate().flat_map(|(i, l)| l.iter().map(move |&u| (u, i))).collect();
        let fusee_pairs = sub
            .edges
            .iter()
            .filter_map(|&(u, v)| {
                let (lu, lv) = (node_layer[&u], node_layer[&v]);
                (lu != lv).then_some(FuseePair { u, v, layer_u: lu, layer_v: lv })
            })
            .collect();
        let connectors = sub
            .cut
            .iter()
            .map(|&(u, v)| {
                let local = if node_layer.contains_key(&u) { u } else { v };
                Connector { edge: (u, v), local, layer: node_layer[&local] }
            })
            .collect();
        ExecutionPlan { qpu: sub.qpu, layers, node_layer, fusee_pairs, connectors }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn max_fusee_gap(&self) -> usize {
        self.fusee_pairs.iter().map(FuseePair::gap).max().unwrap_or(0)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let file = PlanFile {
            qpu: self.qpu,
            layers: self.layers.clone(),
            fusees: self.fusee_pairs.iter().map(|f| [f.u, f.v, f.layer_u, f.layer_v]).collect(),
            connectors: self
                .connectors
                .iter()
                .map(|c| ConnectorRecord { edge: [c.edge.0, c.edge.1], local: c.local, layer: c.layer })
                .collect(),
        };
        serde_json::to_value(file).expect("plan serializes")
    }
}

/// Plug point for single-QPU compilers.
pub trait LayerAssembler: Sync {
    fn assemble(&self, sub: &QpuSubgraph) -> ExecutionPlan;
}

/// Orders the part's nodes and fills layers greedily up to grid capacity.
/// With `deps`, no node is placed before a dependency parent on the same part.
#[derive(Debug, Clone, Copy)]
pub struct CapacityPacker<'a> {
    pub grid: GridSpec,
    pub ordering: Ordering,
    pub deps: Option<&'a DependencyGraph>,
}

impl LayerAssembler for CapacityPacker<'_> {
    fn assemble(&self, sub: &QpuSubgraph) -> ExecutionPlan {
        match self.deps {
            Some(deps) => assemble_layers_with_deps(sub, self.grid, self.ordering, deps),
            None => assemble_layers(sub, self.grid, self.ordering),
        }
    }
}

pub fn assemble_layers(sub: &QpuSubgraph, grid: GridSpec, ordering: Ordering) -> ExecutionPlan {
    let local = LocalGraph::new(sub);
    let order = local.order(ordering);
    pack(sub, &local, &order, grid)
}

/// Like [`assemble_layers`], but the node order is the topological order of
/// the part's internal dependencies that stays closest to the plain ordering,
/// so a measurement never sits in an earlier layer than one it waits for.
pub fn assemble_layers_with_deps(
    sub: &QpuSubgraph,
    grid: GridSpec,
    ordering: Ordering,
    deps: &DependencyGraph,
) -> ExecutionPlan {
    let local = LocalGraph::new(sub);
    let base = local.order(ordering);
    let mut rank = vec![0usize; local.len()];
    for (r, &i) in base.iter().enumerate() {
        rank[i] = r;
    }
    let index: HashMap<NodeId, usize> = local.nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut indegree = vec![0usize; local.len()];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); local.len()];
    for (i, &u) in local.nodes.iter().enumerate() {
        for c in deps.children(u) {
            if let Some(&j) = index.get(c) {
                children[i].push(j);
                indegree[j] += 1;
            }
        }
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..local.len()).filter(|&i| indegree[i] == 0).map(|i| Reverse((rank[i], i))).collect();
    let mut order = Vec::with_capacity(local.len());
    while let Some(Reverse((_, i))) = heap.pop() {
        order.push(i);
        for &j in &children[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                heap.push(Reverse((rank[j], j)));
            }
        }
    }
    debug_assert_eq!(order.len(), local.len(), "dependency graph is acyclic");
    pack(sub, &local, &order, grid)
}

fn pack(sub: &QpuSubgraph, local: &LocalGraph, order: &[usize], grid: GridSpec) -> ExecutionPlan {
    let layers = order
        .chunks(grid.capacity())
        .map(|chunk| chunk.iter().map(|&i| local.nodes[i]).collect())
        .collect();
    ExecutionPlan::from_layers(sub, layers)
}

/// Part-local adjacency with neighbours sorted by global id.
struct LocalGraph {
    nodes: Vec<NodeId>,
    adj: Vec<Vec<usize>>,
}

impl LocalGraph {
    fn new(sub: &QpuSubgraph) -> Self {
        let mut nodes = sub.nodes.clone();
        nodes.sort_unstable();
        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for &(u, v) in &sub.edges {
            let (a, b) = (index[&u], index[&v]);
            adj[a].push(b);
            adj[b].push(a);
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        LocalGraph { nodes, adj }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn order(&self, ordering: Ordering) -> Vec<usize> {
        match ordering {
            Ordering::Bfs => self.bfs_order(),
            Ordering::CuthillMckee => self.rcm_order(),
        }
    }

    /// BFS from the smallest unvisited node, component after component.
    fn bfs_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut order = Vec::with_capacity(self.len());
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                order.push(u);
                for &v in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        order
    }

    /// BFS levels from `start` restricted to unvisited nodes.
    fn level_structure(&self, start: usize, blocked: &[bool]) -> Vec<Vec<usize>> {
        let mut depth = HashMap::from([(start, 0usize)]);
        let mut levels = vec![vec![start]];
        loop {
            let mut next = Vec::new();
            for &u in levels.last().expect("non-empty") {
                for &v in &self.adj[u] {
                    if !blocked[v] && !depth.contains_key(&v) {
                        depth.insert(v, levels.len());
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                return levels;
            }
            levels.push(next);
        }
    }

    /// George–Liu pseudo-peripheral node search.
    fn pseudo_peripheral(&self, start: usize, blocked: &[bool]) -> usize {
        let mut root = start;
        let mut levels = self.level_structure(root, blocked);
        loop {
            let last = levels.last().expect("non-empty");
            let candidate = *last.iter().min_by_key(|&&v| (self.adj[v].len(), v)).expect("non-empty level");
            let cand_levels = self.level_structure(candidate, blocked);
            if cand_levels.len() > levels.len() {
                root = candidate;
                levels = cand_levels;
            } else {
                return root;
            }
        }
    }

    /// Reverse Cuthill–McKee, one component at a time in order of smallest id.
    fn rcm_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut order = Vec::with_capacity(self.len());
        for first in 0..self.len() {
            if seen[first] {
                continue;
            }
            let component = self.level_structure(first, &seen).concat();
            let min_degree = *component.iter().min_by_key(|&&v| (self.adj[v].len(), v)).expect("non-empty");
            let start = self.pseudo_peripheral(min_degree, &seen);

            let mut cm = Vec::with_capacity(component.len());
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                cm.push(u);
                let mut next: Vec<usize> = self.adj[u].iter().copied().filter(|&v| !seen[v]).collect();
                next.sort_unstable_by_key(|&v| (self.adj[v].len(), v));
                for v in next {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
            cm.reverse();
            // reversal keeps every gap, so pick the direction that agrees
            // with id order on more edges
            let mut pos = vec![0usize; self.len()];
            for (i, &u) in cm.iter().enumerate() {
                pos[u] = i;
            }
            let (mut forward, mut backward) = (0usize, 0usize);
            for &u in &cm {
                for &v in self.adj[u].iter().filter(|&&v| v > u) {
                    if pos[v] > pos[u] {
                        forward += 1;
                    } else {
                        backward += 1;
                    }
                }
            }
            if backward > forward {
                cm.reverse();
            }
            order.extend(cm);
        }
        order
    }
}
