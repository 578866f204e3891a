#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcmbqc_core::model::{ComputationGraph, DependencyGraph, Measurement, NodeId, Role};
use dcmbqc_core::qpu::{ExecutionPlan, QpuSubgraph};
use dcmbqc_core::schedule::{list_schedule, LspInstance, MainTask, Schedule};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_edges(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(NodeId, NodeId)> {
    let mut e = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                e.push((u, v));
            }
        }
    }
    e
}

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> ComputationGraph {
    ComputationGraph::new(n, random_edges(rng, n, p)).unwrap()
}

/// Random DAG over a shuffled order; roughly `removee_share` of the nodes are
/// removees and take no arcs.
pub fn random_deps(rng: &mut impl Rng, n: usize, p: f64, removee_share: f64) -> DependencyGraph {
    let nodes: Vec<Measurement> = (0..n)
        .map(|_| {
            if rng.gen_bool(removee_share) {
                Measurement::removee()
            } else {
                Measurement::measuree(rng.gen_range(-3.0..3.0))
            }
        })
        .collect();
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(rng);
    let mut arcs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (u, v) = (order[i], order[j]);
            if nodes[u].role == Role::Measuree && nodes[v].role == Role::Measuree && rng.gen_bool(p) {
                arcs.push((u, v));
            }
        }
    }
    DependencyGraph::new(nodes, arcs).unwrap()
}

/// Random non-empty layering of `0..n`.
pub fn random_layers(rng: &mut impl Rng, n: usize) -> Vec<Vec<NodeId>> {
    let count = rng.gen_range(1..=n.max(1));
    let mut layers = vec![Vec::new(); count];
    for u in 0..n {
        layers[rng.gen_range(0..count)].push(u);
    }
    layers.retain(|l| !l.is_empty());
    layers
}

pub fn plan_of(graph: &ComputationGraph, layers: Vec<Vec<NodeId>>) -> ExecutionPlan {
    ExecutionPlan::from_layers(&QpuSubgraph::whole(graph), layers)
}

/// Random layer-scheduling instance: 1..=qpus QPUs with a few single- or
/// multi-node main tasks each, random syncs between QPUs and random fusees
/// inside each QPU.
pub fn random_instance(rng: &mut impl Rng, max_qpus: usize, max_tasks: usize) -> (LspInstance, DependencyGraph) {
    let qpus = rng.gen_range(1..=max_qpus);
    let mut main = Vec::new();
    let mut owner = Vec::new();
    let mut next = 0;
    for q in 0..qpus {
        let m = rng.gen_range(1..=max_tasks);
        let mut tasks = Vec::new();
        for i in 0..m {
            let size = rng.gen_range(1..=3);
            let nodes: Vec<NodeId> = (next..next + size).collect();
            owner.extend(std::iter::repeat_n((q, i), size));
            next += size;
            tasks.push(MainTask { nodes });
        }
        main.push(tasks);
    }
    let n = next;
    let mut sync = Vec::new();
    let mut fusees = Vec::new();
    for _ in 0..rng.gen_range(0..=2 * n) {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u == v {
            continue;
        }
        if owner[u].0 == owner[v].0 {
            fusees.push((u, v));
        } else {
            sync.push(((u, v), owner[u], owner[v]));
        }
    }
    let k_max = rng.gen_range(1..=3);
    let inst = LspInstance::new(main, sync, fusees, k_max, n, None).unwrap();
    let deps = random_deps(rng, n, 0.15, 0.1);
    (inst, deps)
}

pub fn listed(inst: &LspInstance) -> Schedule {
    list_schedule(inst).unwrap()
}

/// Latest completion over every dependency chain ending at `u`: a chain
/// starting at `a` and taking `k` hops finishes at `layer[a] + 1 + k`.
pub fn chain_completion(deps: &DependencyGraph, layer: &[i64], u: NodeId) -> i64 {
    fn walk(deps: &DependencyGraph, layer: &[i64], v: NodeId, hops: i64, best: &mut i64) {
        *best = (*best).max(layer[v] + 1 + hops);
        for &p in deps.parents(v) {
            walk(deps, layer, p, hops + 1, best);
        }
    }
    let mut best = i64::MIN;
    walk(deps, layer, u, 0, &mut best);
    best
}

pub fn oracle_measuree(deps: &DependencyGraph, layer: &[i64]) -> u64 {
    (0..deps.node_count())
        .filter(|&u| !deps.is_removee(u))
        .map(|u| (chain_completion(deps, layer, u) - layer[u]) as u64)
        .max()
        .unwrap_or(0)
}

/// Canonical form of a graph on `n` vertices: smallest sorted edge list over
/// all relabelings.
pub fn canonical(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<Vec<(usize, usize)>> = None;
    loop {
        let mut e: Vec<_> = edges.iter().map(|&(u, v)| (perm[u].min(perm[v]), perm[u].max(perm[v]))).collect();
        e.sort_unstable();
        if best.as_ref().is_none_or(|b| e < *b) {
            best = Some(e);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best.unwrap()
}

pub fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

pub fn bandwidth(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = usize::MAX;
    loop {
        let w = edges.iter().map(|&(u, v)| perm[u].abs_diff(perm[v])).max().unwrap_or(0);
        best = best.min(w);
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best
}

pub fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == u && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn small_connected_graphs() -> Vec<(usize, Vec<(usize, usize)>)> {
    let mut out = Vec::new();
    for n in 1..=6 {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let mut seen = BTreeSet::new();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<_> = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
            if edges.len() + 1 < n || !connected(n, &edges) {
                continue;
            }
            let c = canonical(n, &edges);
            if seen.insert(c.clone()) {
                out.push((n, c));
            }
        }
    }
    out
}
