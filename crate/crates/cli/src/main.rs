use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dcmbqc_core::frontend::{gen_benchmark, translate_named, Circuit, Family, FrontendError};
use dcmbqc_core::metrics::LifetimeReport;
use dcmbqc_core::model::{load_bundle, BundleMeta, ModelError, ProgramBundle};
use dcmbqc_core::partition::{adaptive_partition_traced, PartitionConfig, PartitionError};
use dcmbqc_core::pipeline::{cmd_compile, cmd_loss, cmd_sweep, run_stages, PipelineError, RunConfig, SweepParam, SweepRow};
use dcmbqc_core::qpu::Ordering;
use dcmbqc_core::schedule::ScheduleError;

#[derive(Parser, Debug)]
#[command(name = "dcmbqc", version, about = "Distributed MBQC compiler: partition, layer, schedule, report")]
struct Cli {
    /// Seed for every randomised stage
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file whose keys mirror the run configuration fields
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Write the result into this directory instead of stdout
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a benchmark circuit
    Gen {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        qubits: usize,
        /// Emit the translated program bundle instead of the circuit
        #[arg(long)]
        bundle: bool,
    },
    /// Translate a circuit JSON file into a program bundle
    Translate {
        circuit: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Partition a bundle's computation graph across QPUs
    Partition {
        bundle: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Full pipeline plus the single-QPU baseline
    Compile {
        bundle: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Execution plans and the refined layer schedule
    Schedule {
        bundle: PathBuf,
        /// Report the list schedule without annealing
        #[arg(long)]
        no_bdir: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Lifetime reports of the distributed run and the baseline
    Report {
        bundle: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// One pipeline run per parameter value
    Sweep {
        bundle: PathBuf,
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Photon loss probability after a storage time
    Loss {
        #[arg(long)]
        cycles: u64,
        #[arg(long)]
        clock_ns: Option<f64>,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long)]
    qpus: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    eps_q: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    sa_t0: Option<f64>,
    #[arg(long)]
    sa_cooling: Option<f64>,
    #[arg(long)]
    sa_iters: Option<usize>,
    #[arg(long)]
    fill_factor: Option<f64>,
    #[arg(long)]
    ordering: Option<Ordering>,
    #[arg(long)]
    clock_ns: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Validation(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Validation(e) | Failure::Internal(e) => e,
        }
    }
}

fn model_failure(e: ModelError) -> Failure {
    match &e {
        ModelError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => Failure::Usage(e.into()),
        ModelError::Io { .. } => Failure::Internal(e.into()),
        _ => Failure::Validation(e.into()),
    }
}

fn frontend_failure(e: FrontendError) -> Failure {
    match e {
        FrontendError::Model(m) => model_failure(m),
        other => Failure::Validation(other.into()),
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match &e {
        PipelineError::Config(_) | PipelineError::Partition(_) => Failure::Validation(e.into()),
        PipelineError::Schedule(ScheduleError::BadInstance(_) | ScheduleError::ConnectorMismatch { .. }) => {
            Failure::Internal(e.into())
        }
        PipelineError::Schedule(_) | PipelineError::Lifetime(_) => Failure::Internal(e.into()),
    }
}

fn partition_failure(e: PartitionError) -> Failure {
    Failure::Validation(e.into())
}

fn resolve_config(cli: &Cli, run: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(Failure::Usage)?;
            RunConfig::from_json(&text).map_err(pipeline_failure)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    macro_rules! apply {
        ($($f:ident),*) => { $( if let Some(v) = run.$f { cfg.$f = v; } )* };
    }
    apply!(qpus, kmax, alpha_max, eps_q, gamma, sa_t0, sa_cooling, sa_iters, fill_factor, ordering, clock_ns);
    cfg.validate().map_err(pipeline_failure)?;
    Ok(cfg)
}

fn read_bundle(path: &Path) -> Result<ProgramBundle, Failure> {
    load_bundle(path).map_err(model_failure)
}

/// Output destination: stdout, or `<dir>/<name>.<ext>`.
fn emit(cli: &Cli, name: &str, ext: &str, body: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::Internal)?;
            let path = dir.join(format!("{name}.{ext}"));
            fs::write(&path, body).with_context(|| format!("writing {}", path.display())).map_err(Failure::Internal)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(body.as_bytes()).and_then(|_| out.flush()).context("writing stdout").map_err(Failure::Internal)
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| Failure::Internal(e.into());
    w.write_record(header).map_err(internal)?;
    for r in rows {
        w.write_record(&r).map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Internal(anyhow::anyhow!("flushing csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const REPORT_HEADER: [&str; 10] = [
    "run",
    "qpus",
    "tau_fusee",
    "tau_measuree",
    "tau_local",
    "tau_remote",
    "tau_photon",
    "exec_time",
    "clock_ns",
    "loss_probability",
];

fn report_row(run: &str, qpus: usize, r: &LifetimeReport) -> Vec<String> {
    vec![
        run.to_string(),
        qpus.to_string(),
        r.tau_fusee.to_string(),
        r.tau_measuree.to_string(),
        r.tau_local.to_string(),
        r.tau_remote.to_string(),
        r.tau_photon.to_string(),
        r.exec_time.to_string(),
        r.clock_ns.to_string(),
        r.loss_probability.to_string(),
    ]
}

const SWEEP_HEADER: [&str; 9] =
    ["value", "exec_time", "tau_photon", "tau_factor", "exec_factor", "cut", "modularity", "status", "error"];

fn sweep_row(r: &SweepRow) -> Vec<String> {
    vec![
        r.value.to_string(),
        opt(r.exec_time),
        opt(r.tau_photon),
        opt(r.tau_factor),
        opt(r.exec_factor),
        opt(r.cut),
        opt(r.modularity),
        if r.error.is_some() { "error" } else { "ok" }.to_string(),
        r.error.clone().unwrap_or_default(),
    ]
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let format = cli.format;
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Gen { family, qubits, bundle } => {
            let circuit = gen_benchmark(*family, *qubits, seed).map_err(frontend_failure)?;
            let name = format!("{family}-{qubits}");
            if *bundle {
                let meta = BundleMeta { name: name.clone(), qubits: *qubits, seed, generator: family.to_string() };
                let b = translate_named(&circuit, meta).map_err(frontend_failure)?;
                emit(cli, &name, "bundle.json", &b.to_json())
            } else {
                emit(cli, &name, "circuit.json", &circuit.to_json())
            }
        }
        Command::Translate { circuit, name } => {
            let text = fs::read_to_string(circuit)
                .with_context(|| format!("reading circuit {}", circuit.display()))
                .map_err(Failure::Usage)?;
            let c = Circuit::from_json(&text).map_err(frontend_failure)?;
            let name = name.clone().unwrap_or_else(|| {
                let stem = circuit.file_stem().and_then(|s| s.to_str()).unwrap_or("circuit");
                stem.trim_end_matches(".circuit").to_string()
            });
            let meta = BundleMeta { name: name.clone(), qubits: c.qubits, seed, generator: "circuit".into() };
            let b = translate_named(&c, meta).map_err(frontend_failure)?;
            emit(cli, &name, "bundle.json", &b.to_json())
        }
        Command::Partition { bundle, run } => {
            let cfg = resolve_config(cli, run)?;
            let b = read_bundle(bundle)?;
            let pc = PartitionConfig { k: cfg.qpus, eps_q: cfg.eps_q, gamma: cfg.gamma, alpha_max: cfg.alpha_max, seed: cfg.seed };
            let outcome = adaptive_partition_traced(&b.graph, &pc).map_err(partition_failure)?;
            let p = &outcome.best;
            let body = json!({
                "program": b.meta.name,
                "k": p.k,
                "assignment": p.assignment,
                "cut": p.cut_edges.len(),
                "modularity": p.modularity,
                "alpha_used": p.imbalance_used,
                "part_sizes": p.part_sizes(),
                "probes": outcome.probes,
                "config": cfg,
            });
            emit(cli, &format!("{}.partition", b.meta.name), "json", &pretty(&body))
        }
        Command::Compile { bundle, run } => {
            let cfg = resolve_config(cli, run)?;
            let b = read_bundle(bundle)?;
            let report = cmd_compile(&b, &cfg).map_err(pipeline_failure)?;
            match format {
                Some(Format::Csv) => {
                    let rows = [
                        report_row("distributed", report.distributed.qpus, &report.distributed.lifetime),
                        report_row("baseline", report.baseline.qpus, &report.baseline.lifetime),
                    ];
                    emit(cli, &format!("{}.compile", b.meta.name), "csv", &csv_text(&REPORT_HEADER, rows)?)
                }
                _ => emit(cli, &format!("{}.compile", b.meta.name), "json", &report.to_json()),
            }
        }
        Command::Schedule { bundle, no_bdir, run } => {
            let cfg = resolve_config(cli, run)?;
            let b = read_bundle(bundle)?;
            let stages = run_stages(&b, &cfg, cfg.qpus).map_err(pipeline_failure)?;
            let plans: Vec<Value> = stages.plans.iter().map(|p| p.to_json_value()).collect();
            let list = stages.list_schedule.to_json_value(&stages.instance, &stages.list_report);
            let refined = if *no_bdir {
                list.clone()
            } else {
                stages.schedule.to_json_value(&stages.instance, &stages.report)
            };
            let body = json!({
                "program": b.meta.name,
                "plans": plans,
                "list_schedule": list,
                "schedule": refined,
                "config": cfg,
            });
            emit(cli, &format!("{}.schedule", b.meta.name), "json", &pretty(&body))
        }
        Command::Report { bundle, run } => {
            let cfg = resolve_config(cli, run)?;
            let b = read_bundle(bundle)?;
            let report = cmd_compile(&b, &cfg).map_err(pipeline_failure)?;
            match format {
                Some(Format::Json) => {
                    let body = json!({
                        "program": report.program,
                        "distributed": report.distributed.lifetime,
                        "baseline": report.baseline.lifetime,
                        "improvement": report.improvement,
                        "config": report.config,
                    });
                    emit(cli, &format!("{}.report", b.meta.name), "json", &pretty(&body))
                }
                _ => {
                    let rows = [
                        report_row("distributed", report.distributed.qpus, &report.distributed.lifetime),
                        report_row("baseline", report.baseline.qpus, &report.baseline.lifetime),
                    ];
                    emit(cli, &format!("{}.report", b.meta.name), "csv", &csv_text(&REPORT_HEADER, rows)?)
                }
            }
        }
        Command::Sweep { bundle, param, values, run } => {
            let cfg = resolve_config(cli, run)?;
            let b = read_bundle(bundle)?;
            let rows = cmd_sweep(&b, &cfg, *param, values).map_err(pipeline_failure)?;
            let name = format!("{}.sweep", b.meta.name);
            match format {
                Some(Format::Json) => emit(cli, &name, "json", &pretty(&json!({"param": param, "rows": rows, "config": cfg}))),
                _ => emit(cli, &name, "csv", &csv_text(&SWEEP_HEADER, rows.iter().map(sweep_row))?),
            }
        }
        Command::Loss { cycles, clock_ns } => {
            let clock = match clock_ns {
                Some(c) => *c,
                None => resolve_config(cli, &RunArgs::default())?.clock_ns,
            };
            let r = cmd_loss(*cycles, clock).map_err(pipeline_failure)?;
            match format {
                Some(Format::Csv) => {
                    let row = vec![r.cycles.to_string(), r.clock_ns.to_string(), r.loss_probability.to_string()];
                    emit(cli, "loss", "csv", &csv_text(&["cycles", "clock_ns", "loss_probability"], [row])?)
                }
                _ => emit(cli, "loss", "json", &pretty(&json!(r))),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
