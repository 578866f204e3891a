mod common;

use common::*;
use proptest::prelude::*;

use dcmbqc_core::frontend::{benchmark_bundle, Family};
use dcmbqc_core::metrics::{lifetime_distributed, ScheduleEvaluator};
use dcmbqc_core::model::{ComputationGraph, DependencyGraph};
use dcmbqc_core::pipeline::{run_stages, RunConfig};
use dcmbqc_core::schedule::{
    bdir, brute_force, gbp_reduce, list_schedule, validate, BdirConfig, LspInstance, MainTask, Schedule,
};

#[test]
fn five_hundred_random_instances() {
    let mut r = rng(41);
    for case in 0..500 {
        let (inst, deps) = random_instance(&mut r, 4, 4);
        let list = list_schedule(&inst).unwrap();
        assert!(validate(&inst, &list).is_empty(), "case {case}: list schedule infeasible");
        let cfg = BdirConfig { seed: case, ..BdirConfig::default() };
        let out = bdir(&inst, &deps, &list, &cfg).unwrap();
        assert!(validate(&inst, &out.schedule).is_empty(), "case {case}: bdir schedule infeasible");
        let list_cost = lifetime_distributed(&inst, &list, &deps).unwrap().tau_photon;
        let bdir_cost = lifetime_distributed(&inst, &out.schedule, &deps).unwrap().tau_photon;
        assert_eq!(bdir_cost, out.cost);
        assert_eq!(list_cost, out.initial_cost);
        assert!(bdir_cost <= list_cost, "case {case}: {bdir_cost} > {list_cost}");
        assert_eq!(out.schedule.sync.len(), inst.sync.len());
    }
}

#[test]
fn bdir_is_deterministic() {
    let mut r = rng(42);
    for seed in 0..20 {
        let (inst, deps) = random_instance(&mut r, 3, 5);
        let list = list_schedule(&inst).unwrap();
        let cfg = BdirConfig { seed, ..BdirConfig::default() };
        assert_eq!(bdir(&inst, &deps, &list, &cfg).unwrap(), bdir(&inst, &deps, &list, &cfg).unwrap());
    }
}

#[test]
fn sync_between_two_qpus_matches_exhaustive_feasibility() {
    let main = vec![
        vec![MainTask { nodes: vec![0] }, MainTask { nodes: vec![1] }],
        vec![MainTask { nodes: vec![2] }, MainTask { nodes: vec![3] }],
    ];
    let inst = LspInstance::new(main, vec![((0, 3), (0, 0), (1, 1))], vec![], 1, 4, Some(6)).unwrap();
    let s = list_schedule(&inst).unwrap();
    assert!(validate(&inst, &s).is_empty());
    // earliest slot where some feasible schedule can host the sync
    let mut earliest = usize::MAX;
    for a in 1..=6 {
        for b in 1..=6 {
            for c in 1..=6 {
                for d in 1..=6 {
                    for k in 1..=6 {
                        let cand = Schedule { main: vec![vec![a, b], vec![c, d]], sync: vec![k] };
                        if a < b && c < d && validate(&inst, &cand).is_empty() {
                            earliest = earliest.min(k);
                        }
                    }
                }
            }
        }
    }
    assert!(s.sync[0] >= earliest);
    assert_ne!(s.sync[0], s.main[0][0]);
    assert_ne!(s.sync[0], s.main[1][1]);
}

#[test]
fn misplaced_sync_is_repaired() {
    let main = vec![
        vec![MainTask { nodes: vec![0] }, MainTask { nodes: vec![1] }, MainTask { nodes: vec![2] }],
        vec![MainTask { nodes: vec![3] }, MainTask { nodes: vec![4] }, MainTask { nodes: vec![5] }],
    ];
    let inst = LspInstance::new(main, vec![((0, 3), (0, 0), (1, 0))], vec![(0, 1), (3, 4)], 1, 6, None).unwrap();
    let deps = DependencyGraph::unconstrained(6);
    let init = Schedule { main: vec![vec![1, 2, 3], vec![1, 2, 3]], sync: vec![6] };
    assert!(validate(&inst, &init).is_empty());
    let eval = ScheduleEvaluator::new(&inst, &deps).unwrap();
    assert_eq!(eval.cost(&init.flatten(&inst)), 5);
    let (_, optimum) = brute_force(&inst, &deps, 7).unwrap();
    let hits = (0..10)
        .filter(|&seed| {
            let cfg = BdirConfig { seed, iters: 20, ..BdirConfig::default() };
            bdir(&inst, &deps, &init, &cfg).unwrap().cost == optimum.tau_photon
        })
        .count();
    assert!(hits >= 9, "optimum {} reached on {hits}/10 seeds", optimum.tau_photon);
}

#[test]
fn reduction_optimum_equals_bandwidth() {
    let graphs = small_connected_graphs();
    assert_eq!(graphs.len(), 1 + 1 + 2 + 6 + 21 + 112);
    for (n, edges) in graphs {
        let g = ComputationGraph::new(n, edges.clone()).unwrap();
        let (inst, deps) = gbp_reduce(&g);
        let (_, report) = brute_force(&inst, &deps, n).unwrap();
        assert_eq!(report.tau_photon as usize, bandwidth(n, &edges), "{edges:?}");
    }
}

#[test]
fn sync_count_equals_cut_size() {
    let b = benchmark_bundle(Family::Qft, 16, 0).unwrap();
    let run = run_stages(&b, &RunConfig::default(), 4).unwrap();
    assert_eq!(run.instance.sync.len(), run.partition.cut_edges.len());
    assert!(validate(&run.instance, &run.schedule).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn list_and_bdir_are_feasible(seed in any::<u64>()) {
        let (inst, deps) = random_instance(&mut rng(seed), 3, 5);
        let list = list_schedule(&inst).unwrap();
        prop_assert!(validate(&inst, &list).is_empty());
        let out = bdir(&inst, &deps, &list, &BdirConfig { seed, ..BdirConfig::default() }).unwrap();
        prop_assert!(validate(&inst, &out.schedule).is_empty());
        prop_assert!(out.cost <= out.initial_cost);
    }
}
