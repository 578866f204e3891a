//! Layer scheduling across QPUs.
//!
//! Every execution layer of every QPU is a unit-length *main task*; every cut
//! edge is a *synchronization task* bridging the two main tasks that hold its
//! endpoints. At each slot a QPU runs one main task or up to `k_max`
//! synchronization tasks. The objective is the required photon lifetime of the
//! resulting timeline (see [`crate::metrics`]).

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::metrics::{Analysis, LifetimeReport, MetricsError, ScheduleEvaluator};
use crate::model::{ComputationGraph, DependencyGraph, Measurement, NodeId};
use crate::partition::PartitionResult;
use crate::qpu::ExecutionPlan;

/// Global task index: main tasks first (QPU-major, plan order), then
/// synchronization tasks in instance order.
pub type TaskId = usize;

/// `(edge, (qpu, index), (qpu, index))` as accepted by [`LspInstance::new`].
pub type SyncSpec = ((NodeId, NodeId), (usize, usize), (usize, usize));

pub const BRUTE_FORCE_MAX_TASKS: usize = 10;
pub const BRUTE_FORCE_MAX_SLOTS: usize = 8;
/// Bottleneck tasks tried per BDIR move.
const NEIGHBOR_CANDIDATES: usize = 8;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("connector mismatch on edge ({}, {}): {detail}", .edge.0, .edge.1)]
    ConnectorMismatch { edge: (NodeId, NodeId), detail: String },
    #[error("invalid instance: {0}")]
    BadInstance(String),
    #[error("no feasible slot left in horizon {0}")]
    HorizonExhausted(usize),
    #[error("instance too large for exhaustive search ({tasks} tasks, {slots} slots)")]
    TooLarge { tasks: usize, slots: usize },
    #[error("no feasible schedule within {0} slots")]
    Infeasible(usize),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MainRef {
    pub qpu: usize,
    pub index: usize,
    pub id: TaskId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MainTask {
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncTask {
    pub edge: (NodeId, NodeId),
    pub ends: [MainRef; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Main { qpu: usize, index: usize },
    Sync(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LspInstance {
    pub main: Vec<Vec<MainTask>>,
    pub sync: Vec<SyncTask>,
    /// Intra-QPU fusions; only those spanning two main tasks cost anything.
    pub fusees: Vec<(NodeId, NodeId)>,
    pub k_max: usize,
    pub horizon: usize,
    offsets: Vec<usize>,
    node_task: Vec<Option<TaskId>>,
}

impl LspInstance {
    /// `sync` lists `(edge, (qpu, index), (qpu, index))`. A `horizon` of
    /// `None` picks `2·(Σ m_i + K)`.
    pub fn new(
        main: Vec<Vec<MainTask>>,
        sync: Vec<SyncSpec>,
        fusees: Vec<(NodeId, NodeId)>,
        k_max: usize,
        node_count: usize,
        horizon: Option<usize>,
    ) -> Result<Self, ScheduleError> {
        if k_max == 0 {
            return Err(ScheduleError::BadInstance("k_max must be at least 1".into()));
        }
        let mut offsets = Vec::with_capacity(main.len() + 1);
        offsets.push(0);
        for q in &main {
            offsets.push(offsets.last().unwrap() + q.len());
        }
        let main_count = *offsets.last().unwrap();
        let mut node_task = vec![None; node_count];
        for (qpu, tasks) in main.iter().enumerate() {
            for (index, t) in tasks.iter().enumerate() {
                for &u in &t.nodes {
                    let slot = node_task
                        .get_mut(u)
                        .ok_or_else(|| ScheduleError::BadInstance(format!("node {u} outside node space {node_count}")))?;
                    if slot.is_some() {
                        return Err(ScheduleError::BadInstance(format!("node {u} appears in two main tasks")));
                    }
                    *slot = Some(offsets[qpu] + index);
                }
            }
        }
        let mut syncs = Vec::with_capacity(sync.len());
        for (edge, a, b) in sync {
            let mut ends = [MainRef { qpu: 0, index: 0, id: 0 }; 2];
            for (slot, (qpu, index)) in ends.iter_mut().zip([a, b]) {
                if qpu >= main.len() || index >= main[qpu].len() {
                    return Err(ScheduleError::BadInstance(format!(
                        "sync for edge {edge:?} references missing main task ({qpu}, {index})"
                    )));
                }
                *slot = MainRef { qpu, index, id: offsets[qpu] + index };
            }
            if ends[0].qpu == ends[1].qpu {
                return Err(ScheduleError::BadInstance(format!("sync for edge {edge:?} joins QPU {} to itself", a.0)));
            }
            syncs.push(SyncTask { edge, ends });
        }
        for &(u, v) in &fusees {
            if u >= node_count || v >= node_count {
                return Err(ScheduleError::BadInstance(format!("fusee ({u}, {v}) outside node space")));
            }
        }
        let horizon = horizon.unwrap_or(2 * (main_count + syncs.len())).max(1);
        Ok(LspInstance { main, sync: syncs, fusees, k_max, horizon, offsets, node_task })
    }

    pub fn qpu_count(&self) -> usize {
        self.main.len()
    }

    pub fn main_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn task_count(&self) -> usize {
        self.main_count() + self.sync.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_task.len()
    }

    pub fn main_id(&self, qpu: usize, index: usize) -> TaskId {
        self.offsets[qpu] + index
    }

    pub fn task_of(&self, node: NodeId) -> Option<TaskId> {
        self.node_task.get(node).copied().flatten()
    }

    pub fn kind(&self, id: TaskId) -> TaskKind {
        let m = self.main_count();
        if id >= m {
            return TaskKind::Sync(id - m);
        }
        let qpu = self.offsets.partition_point(|&o| o <= id) - 1;
        TaskKind::Main { qpu, index: id - self.offsets[qpu] }
    }

    pub fn main_nodes(&self, id: TaskId) -> &[NodeId] {
        match self.kind(id) {
            TaskKind::Main { qpu, index } => &self.main[qpu][index].nodes,
            TaskKind::Sync(_) => &[],
        }
    }
}

/// Start times (1-based slots).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub main: Vec<Vec<usize>>,
    pub sync: Vec<usize>,
}

impl Schedule {
    pub fn flatten(&self, inst: &LspInstance) -> Vec<usize> {
        let mut v = Vec::with_capacity(inst.task_count());
        for q in &self.main {
            v.extend_from_slice(q);
        }
        v.extend_from_slice(&self.sync);
        v
    }

    pub fn from_flat(inst: &LspInstance, starts: &[usize]) -> Self {
        let main = (0..inst.qpu_count()).map(|q| starts[inst.offsets[q]..inst.offsets[q + 1]].to_vec()).collect();
        Schedule { main, sync: starts[inst.main_count()..].to_vec() }
    }

    /// `{"main": [{qpu, index, t}], "sync": [{id, t}], "kmax", "cost"}` with the lifetime report as cost.
    pub fn to_json_value(&self, inst: &LspInstance, cost: &LifetimeReport) -> serde_json::Value {
        let main: Vec<_> = self
            .main
            .iter()
            .enumerate()
            .flat_map(|(qpu, row)| row.iter().enumerate().map(move |(index, &t)| json!({"qpu": qpu, "index": index, "t": t})))
            .collect();
        let sync: Vec<_> = self.sync.iter().enumerate().map(|(id, &t)| json!({"id": id, "t": t})).collect();
        json!({"main": main, "sync": sync, "kmax": inst.k_max, "cost": cost})
    }

    pub fn makespan(&self) -> usize {
        self.main.iter().flatten().chain(&self.sync).copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    Shape(String),
    OutOfRange { task: TaskId, t: usize },
    Exclusivity { qpu: usize, t: usize, mains: usize, syncs: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(s) => write!(f, "schedule shape: {s}"),
            Violation::OutOfRange { task, t } => write!(f, "task {task} starts at {t}, outside the horizon"),
            Violation::Exclusivity { qpu, t, mains, syncs } => {
                write!(f, "QPU {qpu} at t={t}: {mains} main task(s) and {syncs} sync task(s)")
            }
        }
    }
}

/// Checks range bounds and, per QPU and slot,
/// `#mains + ⌈#syncs / k_max⌉ ≤ 1`. Returns every violation found.
pub fn validate(inst: &LspInstance, sched: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    if sched.main.len() != inst.qpu_count() {
        out.push(Violation::Shape(format!("{} QPU rows for {} QPUs", sched.main.len(), inst.qpu_count())));
        return out;
    }
    for (q, row) in sched.main.iter().enumerate() {
        if row.len() != inst.main[q].len() {
            out.push(Violation::Shape(format!("QPU {q} has {} starts for {} main tasks", row.len(), inst.main[q].len())));
        }
    }
    if sched.sync.len() != inst.sync.len() {
        out.push(Violation::Shape(format!("{} sync starts for {} sync tasks", sched.sync.len(), inst.sync.len())));
    }
    if !out.is_empty() {
        return out;
    }
    let starts = sched.flatten(inst);
    for (task, &t) in starts.iter().enumerate() {
        if t < 1 || t > inst.horizon {
            out.push(Violation::OutOfRange { task, t });
        }
    }
    let mut counts: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for (q, row) in sched.main.iter().enumerate() {
        for &t in row {
            counts.entry((q, t)).or_default().0 += 1;
        }
    }
    for (k, s) in inst.sync.iter().enumerate() {
        for e in &s.ends {
            counts.entry((e.qpu, sched.sync[k])).or_default().1 += 1;
        }
    }
    for ((qpu, t), (mains, syncs)) in counts {
        if mains + syncs.div_ceil(inst.k_max) > 1 {
            out.push(Violation::Exclusivity { qpu, t, mains, syncs });
        }
    }
    out
}

/// One main task per execution layer (plan order), one sync task per cut edge
/// joining the two layers that hold its endpoints.
pub fn build_instance(
    plans: &[ExecutionPlan],
    partition: &PartitionResult,
    k_max: usize,
) -> Result<LspInstance, ScheduleError> {
    if plans.len() != partition.k {
        return Err(ScheduleError::BadInstance(format!("{} plans for {} parts", plans.len(), partition.k)));
    }
    for (i, p) in plans.iter().enumerate() {
        if p.qpu != i {
            return Err(ScheduleError::BadInstance(format!("plan {i} is labelled QPU {}", p.qpu)));
        }
    }
    let a = &partition.assignment;
    // edge -> (qpu, local endpoint, layer) per connector
    #[allow(clippy::type_complexity)]
    let mut records: BTreeMap<(NodeId, NodeId), Vec<(usize, NodeId, usize)>> = BTreeMap::new();
    for p in plans {
        for c in &p.connectors {
            records.entry(c.edge).or_default().push((p.qpu, c.local, c.layer));
        }
    }
    let mut sync = Vec::with_capacity(partition.cut_edges.len());
    for &edge in &partition.cut_edges {
        let mismatch = |detail: String| ScheduleError::ConnectorMismatch { edge, detail };
        let recs = records.remove(&edge).unwrap_or_default();
        if recs.len() != 2 {
            return Err(mismatch(format!("expected 2 connector records, found {}", recs.len())));
        }
        let mut ends = Vec::with_capacity(2);
        for endpoint in [edge.0, edge.1] {
            let &(qpu, local, layer) = recs
                .iter()
                .find(|r| r.1 == endpoint)
                .ok_or_else(|| mismatch(format!("no connector for endpoint {endpoint}")))?;
            if qpu != a[endpoint] {
                return Err(mismatch(format!("endpoint {endpoint} recorded on QPU {qpu}, assigned to {}", a[endpoint])));
            }
            if plans[qpu].node_layer.get(&local) != Some(&layer) {
                return Err(mismatch(format!("connector layer {layer} disagrees with plan for node {local}")));
            }
            ends.push((qpu, layer));
        }
        sync.push((edge, ends[0], ends[1]));
    }
    if let Some((&edge, _)) = records.iter().next() {
        return Err(ScheduleError::ConnectorMismatch { edge, detail: "connector for an uncut edge".into() });
    }
    let main = plans
        .iter()
        .map(|p| p.layers.iter().map(|l| MainTask { nodes: l.clone() }).collect())
        .collect();
    let fusees = plans.iter().flat_map(|p| p.fusee_pairs.iter().map(|f| (f.u, f.v))).collect();
    LspInstance::new(main, sync, fusees, k_max, partition.assignment.len(), None)
}

/// Slot bookkeeping for the list scheduler.
struct Occupancy {
    main: Vec<Vec<bool>>,
    sync: Vec<Vec<usize>>,
    k_max: usize,
}

impl Occupancy {
    fn new(inst: &LspInstance) -> Self {
        let q = inst.qpu_count();
        let h = inst.horizon + 1;
        Occupancy { main: vec![vec![false; h]; q], sync: vec![vec![0; h]; q], k_max: inst.k_max }
    }

    fn fits(&self, inst: &LspInstance, id: TaskId, t: usize) -> bool {
        match inst.kind(id) {
            TaskKind::Main { qpu, .. } => !self.main[qpu][t] && self.sync[qpu][t] == 0,
            TaskKind::Sync(k) => inst.sync[k].ends.iter().all(|e| !self.main[e.qpu][t] && self.sync[e.qpu][t] < self.k_max),
        }
    }

    fn place(&mut self, inst: &LspInstance, id: TaskId, t: usize) {
        match inst.kind(id) {
            TaskKind::Main { qpu, .. } => self.main[qpu][t] = true,
            TaskKind::Sync(k) => {
                for e in &inst.sync[k].ends {
                    self.sync[e.qpu][t] += 1;
                }
            }
        }
    }

    fn unplace(&mut self, inst: &LspInstance, id: TaskId, t: usize) {
        match inst.kind(id) {
            TaskKind::Main { qpu, .. } => self.main[qpu][t] = false,
            TaskKind::Sync(k) => {
                for e in &inst.sync[k].ends {
                    self.sync[e.qpu][t] -= 1;
                }
            }
        }
    }
}

/// Dispatches tasks in ascending `(priority, main-before-sync, id)` order,
/// each at its earliest feasible slot. Priorities are doubled so the
/// half-integer sync priorities stay exact.
///
/// With `keep_order`, a task never starts before the previously dispatched
/// task of any QPU it touches, so the per-QPU order follows the priorities.
/// A pinned task holds its slot and takes part in the ordering at its own
/// priority.
fn dispatch(
    inst: &LspInstance,
    doubled_priority: impl Fn(TaskId) -> usize,
    pinned: Option<(TaskId, usize)>,
    keep_order: bool,
) -> Result<Vec<usize>, ScheduleError> {
    let m = inst.main_count();
    let mut order: Vec<(usize, bool, TaskId)> =
        (0..inst.task_count()).map(|id| (doubled_priority(id), id >= m, id)).collect();
    order.sort_unstable();
    let mut occ = Occupancy::new(inst);
    let mut starts = vec![0; inst.task_count()];
    let mut cursor = vec![1usize; inst.qpu_count()];
    let pinned = pinned.map(|(id, t)| (id, t.clamp(1, inst.horizon)));
    if let Some((id, t)) = pinned {
        occ.place(inst, id, t);
        starts[id] = t;
    }
    let qpus_of = |id: TaskId| -> [usize; 2] {
        match inst.kind(id) {
            TaskKind::Main { qpu, .. } => [qpu, qpu],
            TaskKind::Sync(k) => [inst.sync[k].ends[0].qpu, inst.sync[k].ends[1].qpu],
        }
    };
    for (_, _, id) in order {
        let qs = qpus_of(id);
        let t = if pinned.is_some_and(|(p, _)| p == id) {
            starts[id]
        } else {
            let from = if keep_order { cursor[qs[0]].max(cursor[qs[1]]) } else { 1 };
            let t = (from..=inst.horizon)
                .find(|&t| occ.fits(inst, id, t))
                .ok_or(ScheduleError::HorizonExhausted(inst.horizon))?;
            occ.place(inst, id, t);
            starts[id] = t;
            t
        };
        for q in qs {
            cursor[q] = cursor[q].max(t);
        }
    }
    Ok(starts)
}

/// Priority list scheduling: main task `J_{i,j}` has priority `j`, a sync
/// task joining `J_{i,j}` and `J_{i',j'}` has priority `(j + j')/2`.
pub fn list_schedule(inst: &LspInstance) -> Result<Schedule, ScheduleError> {
    let starts = dispatch(
        inst,
        |id| match inst.kind(id) {
            TaskKind::Main { index, .. } => 2 * (index + 1),
            TaskKind::Sync(k) => inst.sync[k].ends.iter().map(|e| e.index + 1).sum(),
        },
        None,
        false,
    )?;
    Ok(Schedule::from_flat(inst, &starts))
}

/// Pins `task` at `slot` and list-schedules everything else with priority
/// equal to its start time in `current`, keeping each QPU's task order.
pub fn pin_and_reschedule(
    inst: &LspInstance,
    current: &[usize],
    task: TaskId,
    slot: usize,
) -> Result<Vec<usize>, ScheduleError> {
    dispatch(inst, |id| 2 * current[id], Some((task, slot)), true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdirConfig {
    pub t0: f64,
    pub cooling: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for BdirConfig {
    fn default() -> Self {
        BdirConfig { t0: 10.0, cooling: 0.95, iters: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdirOutcome {
    pub schedule: Schedule,
    pub cost: u64,
    pub initial_cost: u64,
    /// Cost of the current schedule after each iteration.
    pub trace: Vec<u64>,
}

/// Per-task neighbourhoods used to price a single task's own contribution.
struct TaskIndex {
    fusee_partners: Vec<Vec<TaskId>>,
    /// Syncs attached to a main task, or the two mains of a sync task.
    links: Vec<Vec<TaskId>>,
    /// Nodes of each main task in topological order.
    nodes_topo: Vec<Vec<NodeId>>,
}

impl TaskIndex {
    fn new(eval: &ScheduleEvaluator<'_>) -> Self {
        let inst = eval.instance();
        let n_tasks = inst.task_count();
        let mut fusee_partners = vec![Vec::new(); n_tasks];
        for &(a, b) in eval.fusee_tasks() {
            fusee_partners[a].push(b);
            fusee_partners[b].push(a);
        }
        let mut links = vec![Vec::new(); n_tasks];
        let m = inst.main_count();
        for (k, s) in inst.sync.iter().enumerate() {
            for e in &s.ends {
                links[e.id].push(m + k);
                links[m + k].push(e.id);
            }
        }
        let mut pos = vec![0; inst.node_count()];
        for (i, &u) in eval.model().topo().iter().enumerate() {
            pos[u] = i;
        }
        let nodes_topo = (0..n_tasks)
            .map(|id| {
                let mut v = inst.main_nodes(id).to_vec();
                v.sort_unstable_by_key(|&u| pos[u]);
                v
            })
            .collect();
        TaskIndex { fusee_partners, links, nodes_topo }
    }
}

struct Bdir<'a, 'e> {
    eval: &'e ScheduleEvaluator<'a>,
    index: TaskIndex,
    scratch: Vec<i64>,
}

impl Bdir<'_, '_> {
    /// Cost attributable to `task` alone if it started at `t`, everything
    /// else held where it is.
    fn local_cost(&mut self, analysis: &Analysis, starts: &[usize], task: TaskId, t: usize) -> i64 {
        let inst = self.eval.instance();
        let deps = self.eval.model().deps();
        let t = t as i64;
        let mut cost = 0i64;
        for &p in &self.index.fusee_partners[task] {
            cost = cost.max((t - starts[p] as i64).abs());
        }
        for &l in &self.index.links[task] {
            cost = cost.max((t - starts[l] as i64).abs());
        }
        let nodes = &self.index.nodes_topo[task];
        if nodes.is_empty() {
            return cost;
        }
        let mp = &analysis.maxparent;
        let scratch = &mut self.scratch;
        let in_task = |u: NodeId| inst.task_of(u) == Some(task);
        for &u in nodes {
            let mut m = t + 1;
            for &p in deps.parents(u) {
                let pm = if in_task(p) { scratch[p] } else { mp[p] };
                m = m.max(pm + 1);
            }
            scratch[u] = m;
            if !deps.is_removee(u) {
                cost = cost.max(m - t);
            }
        }
        for &u in nodes {
            for &c in deps.children(u) {
                if in_task(c) {
                    continue;
                }
                let mut m = analysis.net[c] + 1;
                for &p in deps.parents(c) {
                    let pm = if in_task(p) { scratch[p] } else { mp[p] };
                    m = m.max(pm + 1);
                }
                cost = cost.max(m - analysis.net[c]);
            }
        }
        cost
    }

    /// Slot within `span` of the current start minimising the task's own
    /// cost; earliest wins ties.
    fn balance_point(&mut self, analysis: &Analysis, starts: &[usize], task: TaskId) -> usize {
        let horizon = self.eval.instance().horizon;
        let cur = starts[task];
        let span = analysis.report.tau_photon as usize;
        let lo = cur.saturating_sub(span).max(1);
        let hi = (cur + span).min(horizon);
        let mut best = (i64::MAX, cur);
        for t in lo..=hi {
            let c = self.local_cost(analysis, starts, task, t);
            if c < best.0 {
                best = (c, t);
            }
        }
        best.1
    }

    /// Tries each bottleneck task (lowest ids first, at most
    /// `NEIGHBOR_CANDIDATES`) at its balance point and keeps the move with the
    /// lowest resulting cost; earlier candidates win ties. Returns `None` when
    /// no bottleneck task wants to move.
    fn neighbor(&mut self, starts: &[usize]) -> Result<Option<Vec<usize>>, ScheduleError> {
        let analysis = self.eval.analyze(starts);
        let mut candidates: Vec<TaskId> = analysis.bottlenecks.iter().flat_map(|b| b.tasks()).collect();
        candidates.sort_unstable();
        candidates.dedup();
        let mut best: Option<(u64, Vec<usize>)> = None;
        for task in candidates.into_iter().take(NEIGHBOR_CANDIDATES) {
            let t = self.balance_point(&analysis, starts, task);
            if t == starts[task] {
                continue;
            }
            match pin_and_reschedule(self.eval.instance(), starts, task, t) {
                Ok(next) => {
                    let c = self.eval.cost(&next);
                    if best.as_ref().is_none_or(|(b, _)| c < *b) {
                        best = Some((c, next));
                    }
                }
                Err(ScheduleError::HorizonExhausted(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(best.map(|(_, next)| next))
    }
}

/// Bottleneck-driven refinement: simulated annealing whose move pins the
/// current bottleneck task at its balance point and re-packs the rest.
/// Never returns a schedule worse than `init`.
pub fn bdir(
    inst: &LspInstance,
    deps: &DependencyGraph,
    init: &Schedule,
    cfg: &BdirConfig,
) -> Result<BdirOutcome, ScheduleError> {
    let violations = validate(inst, init);
    if !violations.is_empty() {
        return Err(MetricsError::InvalidSchedule(violations).into());
    }
    let eval = ScheduleEvaluator::new(inst, deps)?;
    let mut search = Bdir { index: TaskIndex::new(&eval), eval: &eval, scratch: vec![0; inst.node_count()] };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut current = init.flatten(inst);
    let mut c_current = eval.cost(&current);
    let initial_cost = c_current;
    let mut best = current.clone();
    let mut c_best = c_current;
    let mut temperature = cfg.t0;
    let mut trace = Vec::with_capacity(cfg.iters);

    for _ in 0..cfg.iters {
        let candidate = search.neighbor(&current)?.unwrap_or_else(|| current.clone());
        let c_new = eval.cost(&candidate);
        let delta = c_new as f64 - c_current as f64;
        if delta <= 0.0 || rng.gen::<f64>() < (-delta / temperature).exp() {
            current = candidate;
            c_current = c_new;
        }
        if c_current < c_best {
            best = current.clone();
            c_best = c_current;
        }
        trace.push(c_current);
        temperature *= cfg.cooling;
    }
    Ok(BdirOutcome { schedule: Schedule::from_flat(inst, &best), cost: c_best, initial_cost, trace })
}

/// Exhaustive search over all feasible start-time tuples in `1..=t_cap`.
/// Returns the first optimum in lexicographic order of start times.
pub fn brute_force(
    inst: &LspInstance,
    deps: &DependencyGraph,
    t_cap: usize,
) -> Result<(Schedule, LifetimeReport), ScheduleError> {
    let tasks = inst.task_count();
    if tasks > BRUTE_FORCE_MAX_TASKS || t_cap > BRUTE_FORCE_MAX_SLOTS || t_cap == 0 || t_cap > inst.horizon {
        return Err(ScheduleError::TooLarge { tasks, slots: t_cap });
    }
    let eval = ScheduleEvaluator::new(inst, deps)?;
    // pairwise terms whose both tasks are known once the later one is placed
    let mut earlier: Vec<Vec<TaskId>> = vec![Vec::new(); tasks];
    for &(a, b) in eval.fusee_tasks() {
        earlier[a.max(b)].push(a.min(b));
    }
    let m = inst.main_count();
    for (k, s) in inst.sync.iter().enumerate() {
        for e in &s.ends {
            earlier[m + k].push(e.id);
        }
    }

    struct Search<'s> {
        inst: &'s LspInstance,
        eval: &'s ScheduleEvaluator<'s>,
        earlier: Vec<Vec<TaskId>>,
        occ: Occupancy,
        starts: Vec<usize>,
        t_cap: usize,
        best: Option<(u64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn go(&mut self, id: TaskId, partial: u64) {
            if self.best.as_ref().is_some_and(|(c, _)| partial >= *c) {
                return;
            }
            if id == self.starts.len() {
                let c = self.eval.cost(&self.starts);
                if self.best.as_ref().is_none_or(|(b, _)| c < *b) {
                    self.best = Some((c, self.starts.clone()));
                }
                return;
            }
            for t in 1..=self.t_cap {
                if !self.occ.fits(self.inst, id, t) {
                    continue;
                }
                let bound = self.earlier[id].iter().map(|&o| t.abs_diff(self.starts[o]) as u64).fold(partial, u64::max);
                self.occ.place(self.inst, id, t);
                self.starts[id] = t;
                self.go(id + 1, bound);
                self.occ.unplace(self.inst, id, t);
            }
            self.starts[id] = 0;
        }
    }

    let mut search = Search {
        inst,
        eval: &eval,
        earlier,
        occ: Occupancy::new(inst),
        starts: vec![0; tasks],
        t_cap,
        best: None,
    };
    search.go(0, 0);
    let (_, starts) = search.best.ok_or(ScheduleError::Infeasible(t_cap))?;
    let report = eval.report(&starts);
    Ok((Schedule::from_flat(inst, &starts), report))
}

/// Graph-bandwidth reduction: one single-QPU main task per vertex and a fusee
/// pair per edge. All photons are removees so only fusion waits are priced.
pub fn gbp_reduce(graph: &ComputationGraph) -> (LspInstance, DependencyGraph) {
    let n = graph.node_count();
    let main = vec![(0..n).map(|u| MainTask { nodes: vec![u] }).collect()];
    let inst = LspInstance::new(main, Vec::new(), graph.edges().to_vec(), 1, n, None).expect("reduction is well-formed");
    let deps = DependencyGraph::new(vec![Measurement::removee(); n], std::iter::empty()).expect("no arcs");
    (inst, deps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tasks(sizes: &[usize]) -> (Vec<Vec<MainTask>>, usize) {
        let mut next = 0;
        let main = sizes
            .iter()
            .map(|&m| {
                (0..m)
                    .map(|_| {
                        next += 1;
                        MainTask { nodes: vec![next - 1] }
                    })
                    .collect()
            })
            .collect();
        (main, next)
    }

    #[test]
    fn sequential_single_qpu() {
        let (main, n) = tasks(&[2]);
        let inst = LspInstance::new(main, vec![], vec![], 1, n, None).unwrap();
        let s = list_schedule(&inst).unwrap();
        assert_eq!(s.main, vec![vec![1, 2]]);
        assert_eq!(s.makespan(), 2);
    }

    #[test]
    fn sync_goes_between_layers() {
        let (main, n) = tasks(&[2, 2]);
        let inst = LspInstance::new(main, vec![((0, 3), (0, 0), (1, 1))], vec![], 1, n, None).unwrap();
        let s = list_schedule(&inst).unwrap();
        assert!(validate(&inst, &s).is_empty());
        assert_eq!(s.main, vec![vec![1, 3], vec![1, 3]]);
        assert_eq!(s.sync, vec![2]);
    }

    #[test]
    fn clash_is_reported() {
        let (main, n) = tasks(&[2]);
        let inst = LspInstance::new(main, vec![], vec![], 1, n, None).unwrap();
        let bad = Schedule { main: vec![vec![1, 1]], sync: vec![] };
        assert_eq!(validate(&inst, &bad), vec![Violation::Exclusivity { qpu: 0, t: 1, mains: 2, syncs: 0 }]);
    }

    #[test]
    fn main_and_sync_clash() {
        let (main, n) = tasks(&[1, 1]);
        let inst = LspInstance::new(main, vec![((0, 1), (0, 0), (1, 0))], vec![], 4, n, None).unwrap();
        let bad = Schedule { main: vec![vec![1], vec![2]], sync: vec![1] };
        assert_eq!(validate(&inst, &bad), vec![Violation::Exclusivity { qpu: 0, t: 1, mains: 1, syncs: 1 }]);
    }

    #[test]
    fn k_max_syncs_share_a_slot() {
        let (main, n) = tasks(&[1, 1]);
        let sync = (0..3).map(|_| ((0, 1), (0, 0), (1, 0))).collect();
        let inst = LspInstance::new(main, sync, vec![], 3, n, None).unwrap();
        let ok = Schedule { main: vec![vec![1], vec![1]], sync: vec![2, 2, 2] };
        assert!(validate(&inst, &ok).is_empty());
        let inst2 = LspInstance { k_max: 2, ..inst };
        assert_eq!(validate(&inst2, &ok).len(), 2);
    }

    #[test]
    fn out_of_range_and_shape() {
        let (main, n) = tasks(&[1]);
        let inst = LspInstance::new(main, vec![], vec![], 1, n, Some(3)).unwrap();
        assert_eq!(
            validate(&inst, &Schedule { main: vec![vec![4]], sync: vec![] }),
            vec![Violation::OutOfRange { task: 0, t: 4 }]
        );
        assert!(matches!(validate(&inst, &Schedule { main: vec![], sync: vec![] })[0], Violation::Shape(_)));
    }

    #[test]
    fn sync_to_same_qpu_rejected() {
        let (main, n) = tasks(&[2]);
        assert!(LspInstance::new(main, vec![((0, 1), (0, 0), (0, 1))], vec![], 1, n, None).is_err());
    }

    #[test]
    fn gbp_shapes() {
        let p3 = ComputationGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let (inst, _) = gbp_reduce(&p3);
        assert_eq!(inst.main_count(), 3);
        assert_eq!(inst.fusees.len(), 2);
        assert!(inst.sync.is_empty());
        let k4 = ComputationGraph::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let (inst, deps) = gbp_reduce(&k4);
        assert_eq!((inst.main_count(), inst.fusees.len()), (4, 6));
        assert!(deps.edges().is_empty());
    }

    #[test]
    fn brute_force_small_cases() {
        let p3 = ComputationGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let (inst, deps) = gbp_reduce(&p3);
        assert_eq!(brute_force(&inst, &deps, 4).unwrap().1.tau_photon, 1);
        let k4 = ComputationGraph::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let (inst, deps) = gbp_reduce(&k4);
        assert_eq!(brute_force(&inst, &deps, 5).unwrap().1.tau_photon, 3);

        let (main, n) = tasks(&[1]);
        let inst = LspInstance::new(main, vec![], vec![], 1, n, None).unwrap();
        let (s, r) = brute_force(&inst, &DependencyGraph::unconstrained(1), 2).unwrap();
        assert_eq!(s.main, vec![vec![1]]);
        assert_eq!(r.tau_photon, 1);
    }

    #[test]
    fn brute_force_guard() {
        let (main, n) = tasks(&[11]);
        let inst = LspInstance::new(main, vec![], vec![], 1, n, None).unwrap();
        assert!(matches!(
            brute_force(&inst, &DependencyGraph::unconstrained(n), 8),
            Err(ScheduleError::TooLarge { .. })
        ));
    }

    #[test]
    fn task_kinds() {
        let (main, n) = tasks(&[2, 3]);
        let inst = LspInstance::new(main, vec![((0, 4), (0, 0), (1, 2))], vec![], 1, n, None).unwrap();
        assert_eq!(inst.kind(0), TaskKind::Main { qpu: 0, index: 0 });
        assert_eq!(inst.kind(2), TaskKind::Main { qpu: 1, index: 0 });
        assert_eq!(inst.kind(4), TaskKind::Main { qpu: 1, index: 2 });
        assert_eq!(inst.kind(5), TaskKind::Sync(0));
        assert_eq!(inst.horizon, 2 * 6);
    }
}
