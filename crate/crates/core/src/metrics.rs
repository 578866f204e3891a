//! Required photon lifetime, execution time and photon-loss estimates.
//!
//! A photon is stored in a delay line while it waits for a fusion partner
//! generated in another layer (fusee), for the outcomes its measurement basis
//! depends on (measuree), or, across QPUs, for the connection layer that
//! bridges it (connector). Removees never wait.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DependencyGraph, NodeId};
use crate::qpu::ExecutionPlan;
use crate::schedule::{validate, LspInstance, Schedule, TaskId, Violation};

/// Fibre attenuation, dB per km.
pub const FIBRE_ATTENUATION_DB_PER_KM: f64 = 0.2;
pub const SPEED_OF_LIGHT_KM_PER_S: f64 = 299_792.458;
/// Signal speed in a delay line as a fraction of c.
pub const DELAY_LINE_SPEED_FRACTION: f64 = 2.0 / 3.0;
pub const DEFAULT_CLOCK_NS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("node {0} is not placed in any execution layer")]
    MissingNode(NodeId),
    #[error("plan and dependency graph disagree on node space: plan covers node {node} but deps has {deps} nodes")]
    NodeSpace { node: NodeId, deps: usize },
    #[error("schedule is invalid: {} violation(s), first: {}", .0.len(), .0[0])]
    InvalidSchedule(Vec<Violation>),
}

/// Probability that a photon is lost after being stored for `cycles` clock
/// cycles of `cycle_ns` nanoseconds each, using the dB attenuation model
/// `1 − 10^(−a·L/10)`.
pub fn loss_probability(cycles: u64, cycle_ns: f64) -> f64 {
    assert!(cycle_ns > 0.0, "clock period must be positive");
    let seconds = cycles as f64 * cycle_ns * 1e-9;
    let distance_km = seconds * DELAY_LINE_SPEED_FRACTION * SPEED_OF_LIGHT_KM_PER_S;
    1.0 - 10f64.powf(-FIBRE_ATTENUATION_DB_PER_KM * distance_km / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeReport {
    pub tau_fusee: u64,
    pub tau_measuree: u64,
    pub tau_local: u64,
    pub tau_remote: u64,
    pub tau_photon: u64,
    pub exec_time: u64,
    pub clock_ns: f64,
    pub loss_probability: f64,
}

impl LifetimeReport {
    fn new(tau_fusee: u64, tau_measuree: u64, tau_remote: u64, exec_time: u64) -> Self {
        let tau_local = tau_fusee.max(tau_measuree);
        let tau_photon = tau_local.max(tau_remote);
        LifetimeReport {
            tau_fusee,
            tau_measuree,
            tau_local,
            tau_remote,
            tau_photon,
            exec_time,
            clock_ns: DEFAULT_CLOCK_NS,
            loss_probability: loss_probability(tau_photon, DEFAULT_CLOCK_NS),
        }
    }

    /// Re-prices the loss probability at another clock period.
    pub fn at_clock(mut self, clock_ns: f64) -> Self {
        self.clock_ns = clock_ns;
        self.loss_probability = loss_probability(self.tau_photon, clock_ns);
        self
    }
}

/// Dependency-side data shared by every lifetime evaluation over one program.
#[derive(Debug, Clone)]
pub struct LifetimeModel<'a> {
    deps: &'a DependencyGraph,
    topo: Vec<NodeId>,
}

impl<'a> LifetimeModel<'a> {
    pub fn new(deps: &'a DependencyGraph) -> Self {
        let topo = deps.topo_sort().expect("dependency graphs are acyclic by construction");
        LifetimeModel { deps, topo }
    }

    pub fn deps(&self) -> &'a DependencyGraph {
        self.deps
    }

    pub fn topo(&self) -> &[NodeId] {
        &self.topo
    }

    /// Measuree part of the lifetime calculation. Fills `maxparent` (earliest
    /// measurable time per node) and returns the largest wait over measurees.
    pub fn measuree(&self, net: &[i64], maxparent: &mut Vec<i64>) -> u64 {
        maxparent.clear();
        maxparent.resize(net.len(), 0);
        let mut tau = 0i64;
        for &u in &self.topo {
            let mut mp = net[u] + 1;
            for &p in self.deps.parents(u) {
                mp = mp.max(maxparent[p] + 1);
            }
            maxparent[u] = mp;
            if !self.deps.is_removee(u) {
                tau = tau.max(mp - net[u]);
            }
        }
        tau as u64
    }
}

/// Lifetime of one QPU's plan run back to back, layer `i` at cycle `i`.
pub fn lifetime_single(plan: &ExecutionPlan, deps: &DependencyGraph) -> Result<LifetimeReport, MetricsError> {
    let n = deps.node_count();
    let mut net = vec![-1i64; n];
    for (&u, &layer) in &plan.node_layer {
        if u >= n {
            return Err(MetricsError::NodeSpace { node: u, deps: n });
        }
        net[u] = layer as i64;
    }
    if let Some(missing) = net.iter().position(|&x| x < 0) {
        return Err(MetricsError::MissingNode(missing));
    }
    let tau_fusee = plan.fusee_pairs.iter().map(|f| f.gap() as u64).max().unwrap_or(0);
    let model = LifetimeModel::new(deps);
    let tau_measuree = model.measuree(&net, &mut Vec::new());
    Ok(LifetimeReport::new(tau_fusee, tau_measuree, 0, plan.layer_count() as u64))
}

/// Lifetime of a scheduled layer-scheduling instance.
pub fn lifetime_distributed(
    inst: &LspInstance,
    sched: &Schedule,
    deps: &DependencyGraph,
) -> Result<LifetimeReport, MetricsError> {
    let violations = validate(inst, sched);
    if !violations.is_empty() {
        return Err(MetricsError::InvalidSchedule(violations));
    }
    let eval = ScheduleEvaluator::new(inst, deps)?;
    Ok(eval.report(&sched.flatten(inst)))
}

/// A term of the objective attaining its current maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bottleneck {
    Fusee { a: TaskId, b: TaskId },
    Measuree { node: NodeId, task: TaskId, chain_source: TaskId },
    Remote { sync: TaskId, main: TaskId },
}

impl Bottleneck {
    pub fn tasks(&self) -> [TaskId; 2] {
        match *self {
            Bottleneck::Fusee { a, b } => [a, b],
            Bottleneck::Measuree { task, chain_source, .. } => [task, chain_source],
            Bottleneck::Remote { sync, main } => [main, sync],
        }
    }
}

/// Detailed evaluation of one schedule.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: LifetimeReport,
    pub net: Vec<i64>,
    pub maxparent: Vec<i64>,
    pub bottlenecks: Vec<Bottleneck>,
}

/// Objective of the layer-scheduling problem over flat start-time vectors
/// (indexed by [`TaskId`]). Used for reporting, by the heuristics, and by the
/// exhaustive oracle, so every caller prices schedules identically.
#[derive(Debug, Clone)]
pub struct ScheduleEvaluator<'a> {
    inst: &'a LspInstance,
    model: LifetimeModel<'a>,
    /// Fusee pairs as task pairs (different tasks only).
    fusee_tasks: Vec<(TaskId, TaskId)>,
}

impl<'a> ScheduleEvaluator<'a> {
    pub fn new(inst: &'a LspInstance, deps: &'a DependencyGraph) -> Result<Self, MetricsError> {
        let n = deps.node_count();
        if let Some(u) = (0..inst.node_count()).find(|&u| u >= n) {
            return Err(MetricsError::NodeSpace { node: u, deps: n });
        }
        if inst.node_count() < n {
            return Err(MetricsError::MissingNode(inst.node_count()));
        }
        if let Some(u) = (0..n).find(|&u| inst.task_of(u).is_none()) {
            return Err(MetricsError::MissingNode(u));
        }
        let fusee_tasks = inst
            .fusees
            .iter()
            .filter_map(|&(u, v)| {
                let (a, b) = (inst.task_of(u)?, inst.task_of(v)?);
                (a != b).then_some((a, b))
            })
            .collect();
        Ok(ScheduleEvaluator { inst, model: LifetimeModel::new(deps), fusee_tasks })
    }

    pub fn instance(&self) -> &'a LspInstance {
        self.inst
    }

    pub fn model(&self) -> &LifetimeModel<'a> {
        &self.model
    }

    pub fn fusee_tasks(&self) -> &[(TaskId, TaskId)] {
        &self.fusee_tasks
    }

    fn net_index(&self, starts: &[usize], net: &mut Vec<i64>) {
        net.clear();
        net.extend((0..self.inst.node_count()).map(|u| starts[self.inst.task_of(u).expect("checked in new")] as i64));
    }

    fn fusee(&self, starts: &[usize]) -> u64 {
        self.fusee_tasks.iter().map(|&(a, b)| starts[a].abs_diff(starts[b]) as u64).max().unwrap_or(0)
    }

    fn remote(&self, starts: &[usize]) -> u64 {
        let m = self.inst.main_count();
        self.inst
            .sync
            .iter()
            .enumerate()
            .flat_map(|(k, s)| {
                let st = starts[m + k];
                s.ends.iter().map(move |e| st.abs_diff(starts[e.id]) as u64)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn report(&self, starts: &[usize]) -> LifetimeReport {
        let mut net = Vec::new();
        self.net_index(starts, &mut net);
        let tau_measuree = self.model.measuree(&net, &mut Vec::new());
        let exec = starts.iter().copied().max().unwrap_or(0) as u64;
        LifetimeReport::new(self.fusee(starts), tau_measuree, self.remote(starts), exec)
    }

    pub fn cost(&self, starts: &[usize]) -> u64 {
        self.report(starts).tau_photon
    }

    /// Full evaluation plus every objective term that attains `tau_photon`.
    pub fn analyze(&self, starts: &[usize]) -> Analysis {
        let mut net = Vec::new();
        self.net_index(starts, &mut net);
        let mut maxparent = Vec::new();
        let tau_measuree = self.model.measuree(&net, &mut maxparent);
        let exec = starts.iter().copied().max().unwrap_or(0) as u64;
        let report = LifetimeReport::new(self.fusee(starts), tau_measuree, self.remote(starts), exec);
        let target = report.tau_photon;
        let mut bottlenecks = Vec::new();
        if target == 0 {
            return Analysis { report, net, maxparent, bottlenecks };
        }
        for &(a, b) in &self.fusee_tasks {
            if starts[a].abs_diff(starts[b]) as u64 == target {
                bottlenecks.push(Bottleneck::Fusee { a: a.min(b), b: a.max(b) });
            }
        }
        let deps = self.model.deps();
        for u in 0..net.len() {
            if deps.is_removee(u) || (maxparent[u] - net[u]) as u64 != target {
                continue;
            }
            // follow the parent that sets maxparent back to the start of the chain
            let mut src = u;
            loop {
                let next = deps.parents(src).iter().copied().filter(|&p| maxparent[p] + 1 == maxparent[src]).min();
                match next {
                    Some(p) if maxparent[src] > net[src] + 1 => src = p,
                    _ => break,
                }
            }
            let task = self.inst.task_of(u).expect("checked");
            let chain_source = self.inst.task_of(src).expect("checked");
            bottlenecks.push(Bottleneck::Measuree { node: u, task, chain_source });
        }
        let m = self.inst.main_count();
        for (k, s) in self.inst.sync.iter().enumerate() {
            for e in &s.ends {
                if starts[m + k].abs_diff(starts[e.id]) as u64 == target {
                    bottlenecks.push(Bottleneck::Remote { sync: m + k, main: e.id });
                }
            }
        }
        Analysis { report, net, maxparent, bottlenecks }
    }
}
