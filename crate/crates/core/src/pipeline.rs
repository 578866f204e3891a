//! End-to-end runs: partition, per-QPU layer assembly, scheduling, refinement
//! and lifetime evaluation, with a single-QPU run of the same program as the
//! comparison baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{lifetime_distributed, loss_probability, LifetimeReport, MetricsError, DEFAULT_CLOCK_NS};
use crate::model::ProgramBundle;
use crate::partition::{adaptive_partition, PartitionConfig, PartitionError, PartitionResult};
use crate::qpu::{assemble_layers_with_deps, default_grid, ExecutionPlan, GridSpec, Ordering, QpuSubgraph};
use crate::schedule::{bdir, build_instance, list_schedule, validate, BdirConfig, LspInstance, Schedule, ScheduleError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub qpus: usize,
    pub kmax: usize,
    pub alpha_max: f64,
    pub eps_q: f64,
    pub gamma: f64,
    pub sa_t0: f64,
    pub sa_cooling: f64,
    pub sa_iters: usize,
    pub fill_factor: f64,
    pub ordering: Ordering,
    pub seed: u64,
    pub clock_ns: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            qpus: 4,
            kmax: 4,
            alpha_max: 1.5,
            eps_q: 0.01,
            gamma: 1.02,
            sa_t0: 10.0,
            sa_cooling: 0.95,
            sa_iters: 20,
            fill_factor: GridSpec::DEFAULT_FILL,
            ordering: Ordering::default(),
            seed: 0,
            clock_ns: DEFAULT_CLOCK_NS,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.qpus == 0 {
            return bad("qpus must be at least 1".into());
        }
        if self.kmax == 0 {
            return bad("kmax must be at least 1".into());
        }
        if !(self.fill_factor > 0.0 && self.fill_factor <= 1.0) {
            return bad(format!("fill_factor must lie in (0, 1], got {}", self.fill_factor));
        }
        if !(self.sa_t0 > 0.0 && self.sa_t0.is_finite()) {
            return bad(format!("sa_t0 must be positive, got {}", self.sa_t0));
        }
        if !(self.sa_cooling > 0.0 && self.sa_cooling <= 1.0) {
            return bad(format!("sa_cooling must lie in (0, 1], got {}", self.sa_cooling));
        }
        if !(self.clock_ns > 0.0 && self.clock_ns.is_finite()) {
            return bad(format!("clock_ns must be positive, got {}", self.clock_ns));
        }
        self.partition_config(self.qpus).validate()?;
        Ok(())
    }

    fn partition_config(&self, k: usize) -> PartitionConfig {
        PartitionConfig { k, eps_q: self.eps_q, gamma: self.gamma, alpha_max: self.alpha_max, seed: self.seed }
    }

    fn bdir_config(&self) -> BdirConfig {
        BdirConfig { t0: self.sa_t0, cooling: self.sa_cooling, iters: self.sa_iters, seed: self.seed }
    }

    /// Every QPU gets the grid sized for the whole program.
    pub fn grid(&self, qubits: usize) -> GridSpec {
        GridSpec::new(default_grid(qubits).side, self.fill_factor)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("partition stage: {0}")]
    Partition(#[from] PartitionError),
    #[error("schedule stage: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("lifetime stage: {0}")]
    Lifetime(#[from] MetricsError),
}

/// Every intermediate artifact of one run.
#[derive(Debug, Clone)]
pub struct StageRun {
    pub partition: PartitionResult,
    pub plans: Vec<ExecutionPlan>,
    pub instance: LspInstance,
    pub list_schedule: Schedule,
    pub list_report: LifetimeReport,
    pub schedule: Schedule,
    pub report: LifetimeReport,
}

pub fn partition_stage(bundle: &ProgramBundle, cfg: &RunConfig, qpus: usize) -> Result<PartitionResult, PipelineError> {
    Ok(adaptive_partition(&bundle.graph, &cfg.partition_config(qpus))?)
}

pub fn assemble_stage(bundle: &ProgramBundle, cfg: &RunConfig, partition: &PartitionResult) -> Vec<ExecutionPlan> {
    let grid = cfg.grid(bundle.meta.qubits);
    (0..partition.k)
        .into_par_iter()
        .map(|q| assemble_layers_with_deps(&QpuSubgraph::extract(&bundle.graph, partition, q), grid, cfg.ordering, &bundle.deps))
        .collect()
}

pub fn run_stages(bundle: &ProgramBundle, cfg: &RunConfig, qpus: usize) -> Result<StageRun, PipelineError> {
    cfg.validate()?;
    let partition = partition_stage(bundle, cfg, qpus)?;
    let plans = assemble_stage(bundle, cfg, &partition);
    let instance = build_instance(&plans, &partition, cfg.kmax)?;
    let initial = list_schedule(&instance)?;
    let list_report = lifetime_distributed(&instance, &initial, &bundle.deps)?.at_clock(cfg.clock_ns);
    let refined = bdir(&instance, &bundle.deps, &initial, &cfg.bdir_config())?;
    let violations = validate(&instance, &refined.schedule);
    if !violations.is_empty() {
        return Err(MetricsError::InvalidSchedule(violations).into());
    }
    let report = lifetime_distributed(&instance, &refined.schedule, &bundle.deps)?.at_clock(cfg.clock_ns);
    Ok(StageRun { partition, plans, instance, list_schedule: initial, list_report, schedule: refined.schedule, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub qpus: usize,
    pub cut_edges: usize,
    pub modularity: f64,
    pub imbalance_used: f64,
    pub part_sizes: Vec<usize>,
    pub layers: Vec<usize>,
    pub sync_tasks: usize,
    pub list_tau_photon: u64,
    pub lifetime: LifetimeReport,
}

impl RunSummary {
    fn of(run: &StageRun) -> Self {
        RunSummary {
            qpus: run.partition.k,
            cut_edges: run.partition.cut_edges.len(),
            modularity: run.partition.modularity,
            imbalance_used: run.partition.imbalance_used,
            part_sizes: run.partition.part_sizes(),
            layers: run.plans.iter().map(ExecutionPlan::layer_count).collect(),
            sync_tasks: run.instance.sync.len(),
            list_tau_photon: run.list_report.tau_photon,
            lifetime: run.report,
        }
    }
}

/// `baseline / ours`; 1 when both are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub tau_photon: f64,
    pub exec_time: f64,
}

fn ratio(baseline: u64, ours: u64) -> f64 {
    match (baseline, ours) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        (b, o) => b as f64 / o as f64,
    }
}

impl Improvement {
    pub fn between(baseline: &LifetimeReport, ours: &LifetimeReport) -> Self {
        Improvement {
            tau_photon: ratio(baseline.tau_photon, ours.tau_photon),
            exec_time: ratio(baseline.exec_time, ours.exec_time),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    pub program: String,
    pub qubits: usize,
    pub nodes: usize,
    pub edges: usize,
    pub config: RunConfig,
    pub distributed: RunSummary,
    pub baseline: RunSummary,
    pub improvement: Improvement,
}

impl CompileReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn baseline(bundle: &ProgramBundle, cfg: &RunConfig) -> Result<StageRun, PipelineError> {
    run_stages(bundle, cfg, 1)
}

fn report_from(bundle: &ProgramBundle, cfg: &RunConfig, ours: &StageRun, base: &StageRun) -> CompileReport {
    CompileReport {
        program: bundle.meta.name.clone(),
        qubits: bundle.meta.qubits,
        nodes: bundle.graph.node_count(),
        edges: bundle.graph.edge_count(),
        config: cfg.clone(),
        distributed: RunSummary::of(ours),
        baseline: RunSummary::of(base),
        improvement: Improvement::between(&base.report, &ours.report),
    }
}

/// Distributed run plus the single-QPU baseline of the same program.
pub fn cmd_compile(bundle: &ProgramBundle, cfg: &RunConfig) -> Result<CompileReport, PipelineError> {
    cfg.validate()?;
    let (ours, base) = rayon::join(|| run_stages(bundle, cfg, cfg.qpus), || baseline(bundle, cfg));
    Ok(report_from(bundle, cfg, &ours?, &base?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Kmax,
    AlphaMax,
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kmax" => Ok(SweepParam::Kmax),
            "alpha_max" => Ok(SweepParam::AlphaMax),
            _ => Err(format!("unknown sweep parameter {s:?} (expected kmax or alpha_max)")),
        }
    }
}

impl SweepParam {
    fn apply(self, cfg: &RunConfig, value: f64) -> Result<RunConfig, PipelineError> {
        let mut c = cfg.clone();
        match self {
            SweepParam::Kmax => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(PipelineError::Config(format!("kmax must be a positive integer, got {value}")));
                }
                c.kmax = value as usize;
            }
            SweepParam::AlphaMax => c.alpha_max = value,
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub exec_time: Option<u64>,
    pub tau_photon: Option<u64>,
    pub tau_factor: Option<f64>,
    pub exec_factor: Option<f64>,
    pub cut: Option<usize>,
    pub modularity: Option<f64>,
    pub error: Option<String>,
}

/// One run per value; a failing value yields a row carrying the error.
pub fn cmd_sweep(
    bundle: &ProgramBundle,
    cfg: &RunConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>, PipelineError> {
    if values.is_empty() {
        return Err(PipelineError::Config("sweep needs at least one value".into()));
    }
    // neither swept parameter changes the single-QPU run
    let base = baseline(bundle, cfg)?;
    let rows = values
        .par_iter()
        .map(|&value| {
            let outcome = param.apply(cfg, value).and_then(|c| run_stages(bundle, &c, c.qpus));
            match outcome {
                Ok(run) => {
                    let f = Improvement::between(&base.report, &run.report);
                    SweepRow {
                        value,
                        exec_time: Some(run.report.exec_time),
                        tau_photon: Some(run.report.tau_photon),
                        tau_factor: Some(f.tau_photon),
                        exec_factor: Some(f.exec_time),
                        cut: Some(run.partition.cut_edges.len()),
                        modularity: Some(run.partition.modularity),
                        error: None,
                    }
                }
                Err(e) => SweepRow {
                    value,
                    exec_time: None,
                    tau_photon: None,
                    tau_factor: None,
                    exec_factor: None,
                    cut: None,
                    modularity: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub cycles: u64,
    pub clock_ns: f64,
    pub loss_probability: f64,
}

pub fn cmd_loss(cycles: u64, clock_ns: f64) -> Result<LossReport, PipelineError> {
    if !(clock_ns > 0.0 && clock_ns.is_finite()) {
        return Err(PipelineError::Config(format!("clock_ns must be positive, got {clock_ns}")));
    }
    Ok(LossReport { cycles, clock_ns, loss_probability: loss_probability(cycles, clock_ns) })
}
