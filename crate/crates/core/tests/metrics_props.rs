mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use dcmbqc_core::metrics::{lifetime_distributed, lifetime_single, loss_probability, ScheduleEvaluator};
use dcmbqc_core::model::{ComputationGraph, DependencyGraph, NodeId};
use dcmbqc_core::partition::PartitionResult;
use dcmbqc_core::schedule::{build_instance, LspInstance};

#[test]
fn single_qpu_lifetime_matches_chain_oracle() {
    let mut r = rng(11);
    for case in 0..200 {
        let n = r.gen_range(1..=25);
        let graph = random_graph(&mut r, n, 0.2);
        let deps = random_deps(&mut r, n, 0.12, 0.15);
        let layers = random_layers(&mut r, n);
        let mut layer = vec![0i64; n];
        for (i, l) in layers.iter().enumerate() {
            for &u in l {
                layer[u] = i as i64;
            }
        }
        let fusee = graph.edges().iter().map(|&(u, v)| layer[u].abs_diff(layer[v])).max().unwrap_or(0);
        let plan = plan_of(&graph, layers.clone());
        let got = lifetime_single(&plan, &deps).unwrap();
        let want_measuree = oracle_measuree(&deps, &layer);
        assert_eq!(got.tau_measuree, want_measuree, "case {case}");
        assert_eq!(got.tau_fusee, fusee, "case {case}");
        assert_eq!(got.tau_photon, fusee.max(want_measuree), "case {case}");
        assert_eq!(got.exec_time, layers.len() as u64, "case {case}");
    }
}

#[test]
fn schedule_evaluator_matches_straight_line_recomputation() {
    let mut r = rng(12);
    for case in 0..50 {
        let (inst, deps) = random_instance(&mut r, 3, 3);
        let sched = listed(&inst);
        let starts = sched.flatten(&inst);
        let task_of = |u: NodeId| inst.task_of(u).unwrap();
        let layer: Vec<i64> = (0..inst.node_count()).map(|u| starts[task_of(u)] as i64).collect();
        let fusee = inst.fusees.iter().map(|&(u, v)| layer[u].abs_diff(layer[v])).max().unwrap_or(0);
        let m = inst.main_count();
        let mut remote = 0u64;
        for (k, s) in inst.sync.iter().enumerate() {
            for e in s.ends {
                remote = remote.max(starts[m + k].abs_diff(starts[e.id]) as u64);
            }
        }
        let measuree = oracle_measuree(&deps, &layer);
        let got = lifetime_distributed(&inst, &sched, &deps).unwrap();
        assert_eq!((got.tau_fusee, got.tau_measuree, got.tau_remote), (fusee, measuree, remote), "case {case}");
        assert_eq!(got.tau_photon, fusee.max(measuree).max(remote));
        assert_eq!(got.exec_time, *starts.iter().max().unwrap() as u64);
    }
}

#[test]
fn remote_term_example() {
    let main = vec![
        vec![dcmbqc_core::schedule::MainTask { nodes: vec![0] }],
        vec![dcmbqc_core::schedule::MainTask { nodes: vec![1] }],
    ];
    let inst = LspInstance::new(main, vec![((0, 1), (0, 0), (1, 0))], vec![], 1, 2, Some(8)).unwrap();
    let deps = DependencyGraph::unconstrained(2);
    let eval = ScheduleEvaluator::new(&inst, &deps).unwrap();
    let r = eval.report(&[2, 6, 5]);
    assert_eq!(r.tau_remote, 3);
}

#[test]
fn one_qpu_distributed_equals_single() {
    let mut r = rng(13);
    for _ in 0..50 {
        let n = r.gen_range(1..=20);
        let graph = random_graph(&mut r, n, 0.25);
        let deps = random_deps(&mut r, n, 0.15, 0.1);
        let plan = plan_of(&graph, random_layers(&mut r, n));
        let partition = PartitionResult::from_assignment(&graph, 1, vec![0; n], 1.0);
        let inst = build_instance(std::slice::from_ref(&plan), &partition, 4).unwrap();
        assert!(inst.sync.is_empty());
        let sched = listed(&inst);
        let dist = lifetime_distributed(&inst, &sched, &deps).unwrap();
        assert_eq!(dist, lifetime_single(&plan, &deps).unwrap());
    }
}

proptest! {
    #[test]
    fn adding_a_dependency_never_shortens_lifetime(seed in any::<u64>(), n in 2usize..18) {
        let mut r = rng(seed);
        let graph = random_graph(&mut r, n, 0.2);
        let deps = random_deps(&mut r, n, 0.15, 0.0);
        let plan = plan_of(&graph, random_layers(&mut r, n));
        let before = lifetime_single(&plan, &deps).unwrap().tau_measuree;
        // any arc along a topological order keeps the graph acyclic
        let order = deps.topo_sort().unwrap();
        let i = r.gen_range(0..n - 1);
        let j = r.gen_range(i + 1..n);
        let (u, v) = (order[i], order[j]);
        let mut arcs = deps.edges().to_vec();
        if !arcs.contains(&(u, v)) {
            arcs.push((u, v));
        }
        let more = DependencyGraph::new(deps.measurements().to_vec(), arcs).unwrap();
        prop_assert!(lifetime_single(&plan, &more).unwrap().tau_measuree >= before);
    }

    #[test]
    fn stretching_layers_apart_never_shortens_fusee_lifetime(seed in any::<u64>(), n in 2usize..18) {
        let mut r = rng(seed);
        let edges = random_edges(&mut r, n, 0.3);
        let graph = ComputationGraph::new(n, edges.clone()).unwrap();
        let layers = random_layers(&mut r, n);
        let before = plan_of(&graph, layers.clone()).max_fusee_gap();
        // a fresh isolated node opens a new layer at a random boundary
        let cut = r.gen_range(0..=layers.len());
        let mut stretched = layers;
        stretched.insert(cut, vec![n]);
        let wider = ComputationGraph::new(n + 1, edges).unwrap();
        prop_assert!(plan_of(&wider, stretched).max_fusee_gap() >= before);
    }

    // below ~2e6 cycle·ns the survival probability stays far above f64 resolution
    #[test]
    fn loss_increases_in_cycles(c in 1u64..20_000, d in 1u64..1000, ns in 0.01f64..100.0) {
        prop_assert!(loss_probability(c + d, ns) > loss_probability(c, ns));
    }

    #[test]
    fn loss_increases_in_clock_period(c in 1u64..20_000, ns in 0.01f64..100.0, f in 1.01f64..1.5) {
        prop_assert!(loss_probability(c, ns * f) > loss_probability(c, ns));
    }

    #[test]
    fn loss_is_a_probability_and_never_decreases(c in 0u64..10_000_000, d in 0u64..1_000_000, ns in 0.0f64..1000.0) {
        let p = loss_probability(c, ns);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(loss_probability(c + d, ns) >= p);
    }
}
