//! Graph partitioning across QPUs.
//!
//! [`kway_partition`] is a multilevel balanced k-way partitioner (heavy-edge
//! matching, greedy region growing, boundary FM refinement).
//! [`adaptive_partition`] walks the imbalance factor up and down on a
//! multiplicative grid, keeping the partition with the best modularity.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ComputationGraph, NodeId};

/// Coarsening stops once the graph has at most `COARSEN_PER_PART * k` nodes.
const COARSEN_PER_PART: usize = 20;
const FM_PASSES: usize = 10;
/// Non-improving moves tolerated in one FM pass before giving up.
const FM_PATIENCE: usize = 64;
const INITIAL_TRIALS: usize = 4;
const MAX_LEVELS: usize = 40;
const ADAPTIVE_ITERATION_CAP: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("cannot partition an empty graph")]
    EmptyGraph,
    #[error("k = {k} is outside 1..={n}")]
    BadPartCount { k: usize, n: usize },
    #[error("imbalance {0} must be a finite value >= 1")]
    BadImbalance(f64),
    #[error("balance bound {bound} x {k} parts cannot hold {n} nodes")]
    InfeasibleBalance { bound: usize, k: usize, n: usize },
    #[error("invalid partition config: {0}")]
    BadConfig(String),
}

/// Largest part size allowed at imbalance `alpha`: `⌊alpha · ⌈n/k⌉⌋`.
pub fn balance_bound(n: usize, k: usize, alpha: f64) -> usize {
    let ideal = n.div_ceil(k);
    (alpha * ideal as f64 + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub imbalance_used: f64,
    pub cut_edges: Vec<(NodeId, NodeId)>,
    pub modularity: f64,
}

impl PartitionResult {
    pub fn from_assignment(graph: &ComputationGraph, k: usize, assignment: Vec<usize>, imbalance_used: f64) -> Self {
        let cut_edges = cut_edges(graph, &assignment);
        let modularity = modularity(graph, &assignment);
        PartitionResult { k, assignment, imbalance_used, cut_edges, modularity }
    }

    pub fn part_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &p in &self.assignment {
            sizes[p] += 1;
        }
        sizes
    }

    pub fn max_part_size(&self) -> usize {
        self.part_sizes().into_iter().max().unwrap_or(0)
    }

    /// Nodes of part `p` in ascending order.
    pub fn members(&self, p: usize) -> Vec<NodeId> {
        (0..self.assignment.len()).filter(|&u| self.assignment[u] == p).collect()
    }
}

pub fn cut_edges(graph: &ComputationGraph, assignment: &[usize]) -> Vec<(NodeId, NodeId)> {
    graph.edges().iter().copied().filter(|&(u, v)| assignment[u] != assignment[v]).collect()
}

/// Newman modularity `Σ_c (e_c/m − (d_c/2m)²)`; zero for an edgeless graph.
pub fn modularity(graph: &ComputationGraph, assignment: &[usize]) -> f64 {
    let m = graph.edge_count();
    if m == 0 {
        return 0.0;
    }
    let parts = assignment.iter().copied().max().map_or(0, |p| p + 1);
    let mut intra = vec![0usize; parts];
    let mut degree = vec![0usize; parts];
    for &(u, v) in graph.edges() {
        degree[assignment[u]] += 1;
        degree[assignment[v]] += 1;
        if assignment[u] == assignment[v] {
            intra[assignment[u]] += 1;
        }
    }
    let m = m as f64;
    intra
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| {
            let frac = d as f64 / (2.0 * m);
            e as f64 / m - frac * frac
        })
        .sum()
}

/// Vertex- and edge-weighted CSR graph used inside the multilevel scheme.
#[derive(Debug, Clone)]
struct WGraph {
    vwgt: Vec<u32>,
    xadj: Vec<usize>,
    adjncy: Vec<usize>,
    adjwgt: Vec<u32>,
}

impl WGraph {
    fn from_graph(g: &ComputationGraph) -> Self {
        let n = g.node_count();
        let mut xadj = Vec::with_capacity(n + 1);
        let mut adjncy = Vec::with_capacity(2 * g.edge_count());
        xadj.push(0);
        for u in 0..n {
            adjncy.extend_from_slice(g.neighbors(u));
            xadj.push(adjncy.len());
        }
        let adjwgt = vec![1; adjncy.len()];
        WGraph { vwgt: vec![1; n], xadj, adjncy, adjwgt }
    }

    fn n(&self) -> usize {
        self.vwgt.len()
    }

    fn total_weight(&self) -> usize {
        self.vwgt.iter().map(|&w| w as usize).sum()
    }

    fn arcs(&self, u: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let r = self.xadj[u]..self.xadj[u + 1];
        self.adjncy[r.clone()].iter().copied().zip(self.adjwgt[r].iter().copied())
    }

    fn cut(&self, part: &[usize]) -> u64 {
        let mut c = 0u64;
        for u in 0..self.n() {
            for (v, w) in self.arcs(u) {
                if part[u] != part[v] {
                    c += w as u64;
                }
            }
        }
        c / 2
    }
}

struct Level {
    coarse: WGraph,
    cmap: Vec<usize>,
}

fn coarsen_once(g: &WGraph, max_vwgt: u32, rng: &mut ChaCha8Rng) -> Level {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mate = vec![usize::MAX; n];
    for &v in &order {
        if mate[v] != usize::MAX {
            continue;
        }
        let mut best: Option<(u32, usize)> = None;
        for (u, w) in g.arcs(v) {
            if mate[u] != usize::MAX || g.vwgt[u] + g.vwgt[v] > max_vwgt {
                continue;
            }
            if best.is_none_or(|(bw, bu)| w > bw || (w == bw && u < bu)) {
                best = Some((w, u));
            }
        }
        match best {
            Some((_, u)) => {
                mate[v] = u;
                mate[u] = v;
            }
            None => mate[v] = v,
        }
    }

    let mut cmap = vec![usize::MAX; n];
    let mut nc = 0;
    for v in 0..n {
        if cmap[v] == usize::MAX {
            cmap[v] = nc;
            cmap[mate[v]] = nc;
            nc += 1;
        }
    }

    let mut vwgt = vec![0u32; nc];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for v in 0..n {
        vwgt[cmap[v]] += g.vwgt[v];
        members[cmap[v]].push(v);
    }
    let mut xadj = Vec::with_capacity(nc + 1);
    let mut adjncy = Vec::new();
    let mut adjwgt = Vec::new();
    xadj.push(0);
    let mut slot = vec![usize::MAX; nc];
    for (c, mem) in members.iter().enumerate() {
        let start = adjncy.len();
        for &v in mem {
            for (u, w) in g.arcs(v) {
                let cu = cmap[u];
                if cu == c {
                    continue;
                }
                if slot[cu] == usize::MAX {
                    slot[cu] = adjncy.len();
                    adjncy.push(cu);
                    adjwgt.push(w);
                } else {
                    adjwgt[slot[cu]] += w;
                }
            }
        }
        for &cu in &adjncy[start..] {
            slot[cu] = usize::MAX;
        }
        xadj.push(adjncy.len());
    }
    Level { coarse: WGraph { vwgt, xadj, adjncy, adjwgt }, cmap }
}

/// Part weights plus the feasibility bound shared by every refinement step.
struct Balance {
    weights: Vec<usize>,
    bound: usize,
}

impl Balance {
    fn new(g: &WGraph, part: &[usize], k: usize, bound: usize) -> Self {
        let mut weights = vec![0; k];
        for u in 0..g.n() {
            weights[part[u]] += g.vwgt[u] as usize;
        }
        Balance { weights, bound }
    }

    fn can_move(&self, w: usize, from: usize, to: usize) -> bool {
        self.weights[to] + w <= self.bound && self.weights[from] > w
    }

    fn apply(&mut self, w: usize, from: usize, to: usize) {
        self.weights[from] -= w;
        self.weights[to] += w;
    }
}

/// Connectivity of `v` to each part, reusing a scratch buffer.
struct Conn {
    weight: Vec<i64>,
    touched: Vec<usize>,
}

impl Conn {
    fn new(k: usize) -> Self {
        Conn { weight: vec![0; k], touched: Vec::new() }
    }

    fn load(&mut self, g: &WGraph, part: &[usize], v: usize) {
        for &p in &self.touched {
            self.weight[p] = 0;
        }
        self.touched.clear();
        for (u, w) in g.arcs(v) {
            let p = part[u];
            if self.weight[p] == 0 {
                self.touched.push(p);
            }
            self.weight[p] += w as i64;
        }
    }

    /// Best balance-respecting move of `v` to an adjacent part: `(gain, to)`.
    fn best_move(&mut self, g: &WGraph, part: &[usize], bal: &Balance, v: usize) -> Option<(i64, usize)> {
        self.load(g, part, v);
        let own = part[v];
        let internal = self.weight[own];
        let w = g.vwgt[v] as usize;
        let mut best: Option<(i64, usize)> = None;
        for &q in &self.touched {
            if q == own || !bal.can_move(w, own, q) {
                continue;
            }
            let gain = self.weight[q] - internal;
            if best.is_none_or(|(bg, bq)| gain > bg || (gain == bg && q < bq)) {
                best = Some((gain, q));
            }
        }
        best
    }
}

fn is_boundary(g: &WGraph, part: &[usize], v: usize) -> bool {
    g.arcs(v).any(|(u, _)| part[u] != part[v])
}

/// One boundary FM pass with hill climbing and rollback to the best prefix.
/// Returns the cut reduction achieved.
fn fm_pass(g: &WGraph, part: &mut [usize], bal: &mut Balance, conn: &mut Conn) -> i64 {
    let n = g.n();
    let mut locked = vec![false; n];
    let mut heap: BinaryHeap<(i64, Reverse<usize>, usize)> = BinaryHeap::new();
    for v in 0..n {
        if is_boundary(g, part, v) {
            if let Some((gain, q)) = conn.best_move(g, part, bal, v) {
                heap.push((gain, Reverse(v), q));
            }
        }
    }
    let mut moves: Vec<(usize, usize)> = Vec::new();
    let (mut cum, mut best, mut best_len, mut stale) = (0i64, 0i64, 0usize, 0usize);
    while let Some((gain, Reverse(v), q)) = heap.pop() {
        if locked[v] {
            continue;
        }
        match conn.best_move(g, part, bal, v) {
            Some(cur) if cur == (gain, q) => {}
            Some((g2, q2)) => {
                heap.push((g2, Reverse(v), q2));
                continue;
            }
            None => continue,
        }
        let from = part[v];
        bal.apply(g.vwgt[v] as usize, from, q);
        debug_assert!(bal.weights[q] <= bal.bound, "FM move broke the balance bound");
        part[v] = q;
        locked[v] = true;
        moves.push((v, from));
        cum += gain;
        if cum > best {
            best = cum;
            best_len = moves.len();
            stale = 0;
        } else {
            stale += 1;
            if stale > FM_PATIENCE {
                break;
            }
        }
        for (u, _) in g.arcs(v) {
            if !locked[u] {
                if let Some((gu, qu)) = conn.best_move(g, part, bal, u) {
                    heap.push((gu, Reverse(u), qu));
                }
            }
        }
    }
    for &(v, from) in moves[best_len..].iter().rev() {
        bal.apply(g.vwgt[v] as usize, part[v], from);
        part[v] = from;
    }
    best
}

fn fm_refine(g: &WGraph, part: &mut [usize], bal: &mut Balance) {
    let mut conn = Conn::new(bal.weights.len());
    for _ in 0..FM_PASSES {
        if fm_pass(g, part, bal, &mut conn) <= 0 {
            break;
        }
    }
}

/// Moves vertices out of parts above the bound, cheapest cut increase first.
/// Always succeeds on unit weights; best effort on coarse levels.
fn enforce_balance(g: &WGraph, part: &mut [usize], bal: &mut Balance) {
    let k = bal.weights.len();
    let mut conn = Conn::new(k);
    for p in 0..k {
        if bal.weights[p] <= bal.bound {
            continue;
        }
        let mut candidates: Vec<(i64, usize)> = Vec::new();
        for v in (0..g.n()).filter(|&v| part[v] == p) {
            conn.load(g, part, v);
            let best_out = conn.touched.iter().filter(|&&q| q != p).map(|&q| conn.weight[q]).max().unwrap_or(0);
            candidates.push((conn.weight[p] - best_out, v));
        }
        candidates.sort_unstable();
        for (_, v) in candidates {
            if bal.weights[p] <= bal.bound {
                break;
            }
            let w = g.vwgt[v] as usize;
            conn.load(g, part, v);
            let target = (0..k)
                .filter(|&q| q != p && bal.can_move(w, p, q))
                .max_by_key(|&q| (conn.weight[q], Reverse(bal.weights[q]), Reverse(q)));
            if let Some(q) = target {
                bal.apply(w, p, q);
                part[v] = q;
            }
        }
    }
}

/// Greedy BFS region growing: each part grows from a seed until it reaches its
/// share of the total weight; the last part takes the remainder.
fn grow_regions(g: &WGraph, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = g.n();
    let total = g.total_weight();
    let mut part = vec![usize::MAX; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for p in 0..k - 1 {
        let target = total / k + usize::from(p < total % k);
        let mut weight = 0usize;
        let mut queued = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        let mut cursor = 0;
        while weight < target {
            if queue.is_empty() {
                while cursor < n && (part[order[cursor]] != usize::MAX || queued[order[cursor]]) {
                    cursor += 1;
                }
                let Some(&seed) = order.get(cursor) else { break };
                queued[seed] = true;
                queue.push_back(seed);
            }
            let v = queue.pop_front().expect("queue refilled above");
            let w = g.vwgt[v] as usize;
            if weight > 0 && weight + w > target {
                continue;
            }
            part[v] = p;
            weight += w;
            for (u, _) in g.arcs(v) {
                if part[u] == usize::MAX && !queued[u] {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    for x in part.iter_mut() {
        if *x == usize::MAX {
            *x = k - 1;
        }
    }
    part
}

/// Balanced multilevel k-way partition. Every part is non-empty and no part
/// exceeds `⌊alpha · ⌈n/k⌉⌋` nodes.
pub fn kway_partition(graph: &ComputationGraph, k: usize, alpha: f64, seed: u64) -> Result<PartitionResult, PartitionError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(PartitionError::EmptyGraph);
    }
    if k == 0 || k > n {
        return Err(PartitionError::BadPartCount { k, n });
    }
    if !alpha.is_finite() || alpha < 1.0 {
        return Err(PartitionError::BadImbalance(alpha));
    }
    let bound = balance_bound(n, k, alpha);
    if bound * k < n {
        return Err(PartitionError::InfeasibleBalance { bound, k, n });
    }
    if k == 1 {
        return Ok(PartitionResult::from_assignment(graph, 1, vec![0; n], alpha));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fine = WGraph::from_graph(graph);
    let threshold = (COARSEN_PER_PART * k).max(2 * k);
    let max_vwgt = (n.div_ceil(k) / 4).max(1) as u32;

    let mut levels: Vec<Level> = Vec::new();
    loop {
        let current = levels.last().map_or(&fine, |l| &l.coarse);
        if current.n() <= threshold || levels.len() >= MAX_LEVELS {
            break;
        }
        let next = coarsen_once(current, max_vwgt, &mut rng);
        if next.coarse.n() * 20 > current.n() * 19 {
            break;
        }
        levels.push(next);
    }

    let coarsest = levels.last().map_or(&fine, |l| &l.coarse);
    let mut best: Option<(u64, usize, Vec<usize>)> = None;
    for _ in 0..INITIAL_TRIALS {
        let mut part = grow_regions(coarsest, k, &mut rng);
        let mut bal = Balance::new(coarsest, &part, k, bound);
        enforce_balance(coarsest, &mut part, &mut bal);
        fm_refine(coarsest, &mut part, &mut bal);
        let overweight = bal.weights.iter().map(|&w| w.saturating_sub(bound)).sum::<usize>();
        let cut = coarsest.cut(&part);
        if best.as_ref().is_none_or(|(bc, bo, _)| (overweight, cut) < (*bo, *bc)) {
            best = Some((cut, overweight, part));
        }
    }
    let mut part = best.expect("at least one trial").2;

    for i in (0..levels.len()).rev() {
        let finer = if i == 0 { &fine } else { &levels[i - 1].coarse };
        let cmap = &levels[i].cmap;
        let mut projected: Vec<usize> = (0..finer.n()).map(|v| part[cmap[v]]).collect();
        let mut bal = Balance::new(finer, &projected, k, bound);
        enforce_balance(finer, &mut projected, &mut bal);
        fm_refine(finer, &mut projected, &mut bal);
        part = projected;
    }
    if levels.is_empty() {
        // already refined at the finest level, but make the bound unconditional
        let mut bal = Balance::new(&fine, &part, k, bound);
        enforce_balance(&fine, &mut part, &mut bal);
    }

    let result = PartitionResult::from_assignment(graph, k, part, alpha);
    debug_assert!(result.max_part_size() <= bound);
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub k: usize,
    pub eps_q: f64,
    pub gamma: f64,
    pub alpha_max: f64,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig { k: 4, eps_q: 0.01, gamma: 1.02, alpha_max: 1.5, seed: 0 }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<(), PartitionError> {
        if self.k == 0 {
            return Err(PartitionError::BadConfig("k must be at least 1".into()));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(PartitionError::BadConfig(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.alpha_max >= 1.0 && self.alpha_max.is_finite()) {
            return Err(PartitionError::BadConfig(format!("alpha_max must be >= 1, got {}", self.alpha_max)));
        }
        if !(self.eps_q > 0.0 && self.eps_q.is_finite()) {
            return Err(PartitionError::BadConfig(format!("eps_q must be positive, got {}", self.eps_q)));
        }
        Ok(())
    }
}

/// One probe of the adaptive search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub alpha: f64,
    pub modularity: f64,
    pub cut: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOutcome {
    pub best: PartitionResult,
    pub probes: Vec<Probe>,
}

pub fn adaptive_partition(graph: &ComputationGraph, cfg: &PartitionConfig) -> Result<PartitionResult, PartitionError> {
    adaptive_partition_traced(graph, cfg).map(|o| o.best)
}

/// Adaptive imbalance search. `previous modularity` is the previous probe's
/// value, starting from −1. α is kept inside `[1, alpha_max]`.
///
/// Probing is deterministic in α, so a repeated `(α, previous Q)` state means
/// the walk has entered a cycle that can produce nothing new; the search stops
/// there instead of spinning until the iteration cap.
pub fn adaptive_partition_traced(graph: &ComputationGraph, cfg: &PartitionConfig) -> Result<AdaptiveOutcome, PartitionError> {
    cfg.validate()?;
    let mut cache: HashMap<u64, PartitionResult> = HashMap::new();
    let mut visited: HashSet<(u64, u64)> = HashSet::new();
    let mut probes = Vec::new();
    let mut alpha = 1.0f64;
    let mut previous = -1.0f64;
    let mut best: Option<PartitionResult> = None;

    for _ in 0..ADAPTIVE_ITERATION_CAP {
        if !visited.insert((alpha.to_bits(), previous.to_bits())) {
            break;
        }
        let p = match cache.get(&alpha.to_bits()) {
            Some(p) => p.clone(),
            None => {
                let p = kway_partition(graph, cfg.k, alpha, cfg.seed)?;
                cache.insert(alpha.to_bits(), p.clone());
                p
            }
        };
        let q = p.modularity;
        probes.push(Probe { alpha, modularity: q, cut: p.cut_edges.len() });
        if best.as_ref().is_none_or(|b| q > b.modularity) {
            best = Some(p);
        }
        let delta = q - previous;
        previous = q;
        if delta > cfg.eps_q && alpha < cfg.alpha_max {
            alpha = (alpha * cfg.gamma).min(cfg.alpha_max);
        } else if delta < -cfg.eps_q {
            alpha = (alpha / cfg.gamma).max(1.0);
        } else {
            break;
        }
    }
    Ok(AdaptiveOutcome { best: best.expect("at least one probe"), probes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cliques(bridge: bool) -> ComputationGraph {
        let mut e = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    e.push((base + i, base + j));
                }
            }
        }
        if bridge {
            e.push((3, 4));
        }
        ComputationGraph::new(8, e).unwrap()
    }

    #[test]
    fn bound_formula() {
        assert_eq!(balance_bound(8, 2, 1.0), 4);
        assert_eq!(balance_bound(10, 3, 1.2), 4);
        assert_eq!(balance_bound(10, 3, 1.5), 6);
        assert_eq!(balance_bound(100, 4, 1.02), 25);
    }

    #[test]
    fn whole_graph_has_zero_modularity() {
        let g = two_cliques(true);
        assert!(modularity(&g, &[0; 8]).abs() < 1e-15);
    }

    #[test]
    fn clique_split_modularity() {
        let g = two_cliques(false);
        assert_eq!(modularity(&g, &[0, 0, 0, 0, 1, 1, 1, 1]), 0.5);
    }

    #[test]
    fn edgeless_modularity_is_zero() {
        let g = ComputationGraph::new(3, []).unwrap();
        assert_eq!(modularity(&g, &[0, 1, 2]), 0.0);
    }

    #[test]
    fn disjoint_cliques_split_cleanly() {
        let g = two_cliques(false);
        for seed in 0..10 {
            let p = kway_partition(&g, 2, 1.0, seed).unwrap();
            assert!(p.cut_edges.is_empty(), "seed {seed}: {:?}", p.assignment);
            assert_eq!(p.part_sizes(), vec![4, 4]);
        }
    }

    #[test]
    fn single_part() {
        let g = two_cliques(true);
        let p = kway_partition(&g, 1, 1.0, 0).unwrap();
        assert!(p.cut_edges.is_empty());
        assert_eq!(p.modularity, 0.0);
    }

    #[test]
    fn argument_errors() {
        let g = two_cliques(true);
        assert_eq!(kway_partition(&g, 9, 1.0, 0).unwrap_err(), PartitionError::BadPartCount { k: 9, n: 8 });
        assert_eq!(kway_partition(&g, 0, 1.0, 0).unwrap_err(), PartitionError::BadPartCount { k: 0, n: 8 });
        assert!(matches!(kway_partition(&g, 2, 0.5, 0), Err(PartitionError::BadImbalance(_))));
        assert_eq!(kway_partition(&ComputationGraph::empty(), 1, 1.0, 0).unwrap_err(), PartitionError::EmptyGraph);
        let bad = PartitionConfig { gamma: 1.0, ..Default::default() };
        assert!(adaptive_partition(&g, &bad).is_err());
    }

    #[test]
    fn adaptive_finds_clique_split() {
        let g = two_cliques(true);
        let cfg = PartitionConfig { k: 2, ..Default::default() };
        let out = adaptive_partition_traced(&g, &cfg).unwrap();
        assert_eq!(out.best.cut_edges, vec![(3, 4)]);
        // 13 edges: e_c = 6 each, d_c = 13 each
        let expected = 2.0 * (6.0 / 13.0 - (13.0f64 / 26.0).powi(2));
        assert!((out.best.modularity - expected).abs() < 1e-12);
        // flat Q across probes: stops after the first stagnant step
        assert_eq!(out.probes.len(), 2);
        assert_eq!(out.best.imbalance_used, 1.0);
    }
}
