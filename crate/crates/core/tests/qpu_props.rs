mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use dcmbqc_core::model::ComputationGraph;
use dcmbqc_core::partition::PartitionResult;
use dcmbqc_core::qpu::{assemble_layers, assemble_layers_with_deps, ExecutionPlan, GridSpec, Ordering, QpuSubgraph};

fn check_plan(sub: &QpuSubgraph, plan: &ExecutionPlan, capacity: usize) {
    assert_eq!(plan.layer_count(), sub.nodes.len().div_ceil(capacity));
    let placed: Vec<_> = plan.layers.iter().flatten().copied().collect();
    let unique: BTreeSet<_> = placed.iter().copied().collect();
    assert_eq!(placed.len(), unique.len(), "node placed twice");
    assert_eq!(unique, sub.nodes.iter().copied().collect::<BTreeSet<_>>());
    for (i, l) in plan.layers.iter().enumerate() {
        assert!(!l.is_empty() && l.len() <= capacity);
        if i + 1 < plan.layer_count() {
            assert_eq!(l.len(), capacity, "slack before the last layer");
        }
    }
    let fusees: BTreeSet<_> = plan.fusee_pairs.iter().map(|f| (f.u, f.v)).collect();
    for &(u, v) in &sub.edges {
        let same = plan.node_layer[&u] == plan.node_layer[&v];
        assert!(same != fusees.contains(&(u, v)), "edge ({u}, {v}) unaccounted");
    }
    let connectors: BTreeSet<_> = plan.connectors.iter().map(|c| c.edge).collect();
    assert_eq!(connectors, sub.cut.iter().copied().collect());
    for c in &plan.connectors {
        assert_eq!(plan.node_layer[&c.local], c.layer);
    }
}

#[test]
fn random_subgraphs_pack_completely() {
    let mut r = rng(31);
    for _ in 0..100 {
        let n = r.gen_range(1..60);
        let g = random_graph(&mut r, n, 0.12);
        let k = r.gen_range(1..=4);
        let part: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        let p = PartitionResult::from_assignment(&g, k, part, 1.0);
        let deps = random_deps(&mut r, n, 0.1, 0.1);
        let grid = GridSpec::new(r.gen_range(1..6), 0.5);
        for q in 0..k {
            let sub = QpuSubgraph::extract(&g, &p, q);
            for ordering in [Ordering::Bfs, Ordering::CuthillMckee] {
                check_plan(&sub, &assemble_layers(&sub, grid, ordering), grid.capacity());
                let plan = assemble_layers_with_deps(&sub, grid, ordering, &deps);
                check_plan(&sub, &plan, grid.capacity());
                for &(u, v) in deps.edges() {
                    if let (Some(a), Some(b)) = (plan.node_layer.get(&u), plan.node_layer.get(&v)) {
                        assert!(a <= b, "dependency ({u}, {v}) runs backwards");
                    }
                }
            }
        }
    }
}

#[test]
fn cuthill_mckee_never_worse_than_bfs_on_paths() {
    let mut r = rng(32);
    for n in 2..=20 {
        for _ in 0..10 {
            let mut labels: Vec<usize> = (0..n).collect();
            labels.shuffle(&mut r);
            let edges: Vec<_> = labels.windows(2).map(|w| (w[0], w[1])).collect();
            let g = ComputationGraph::new(n, edges).unwrap();
            let sub = QpuSubgraph::whole(&g);
            for side in 1..=5 {
                let grid = GridSpec::new(side, 0.5);
                let rcm = assemble_layers(&sub, grid, Ordering::CuthillMckee).max_fusee_gap();
                let bfs = assemble_layers(&sub, grid, Ordering::Bfs).max_fusee_gap();
                assert!(rcm <= bfs, "n={n} side={side}: rcm {rcm} > bfs {bfs}");
                assert!(rcm <= 1);
            }
        }
    }
}

proptest! {
    #[test]
    fn layer_count_is_tight(seed in any::<u64>(), n in 0usize..80, side in 1usize..8, fill in 0.05f64..1.0) {
        let g = random_graph(&mut rng(seed), n, 0.1);
        let grid = GridSpec::new(side, fill);
        let plan = assemble_layers(&QpuSubgraph::whole(&g), grid, Ordering::CuthillMckee);
        prop_assert_eq!(plan.layer_count(), n.div_ceil(grid.capacity()));
    }

    #[test]
    fn packing_is_deterministic(seed in any::<u64>(), n in 1usize..50) {
        let g = random_graph(&mut rng(seed), n, 0.15);
        let sub = QpuSubgraph::whole(&g);
        let grid = GridSpec::new(3, 0.5);
        prop_assert_eq!(assemble_layers(&sub, grid, Ordering::Bfs), assemble_layers(&sub, grid, Ordering::Bfs));
    }
}
