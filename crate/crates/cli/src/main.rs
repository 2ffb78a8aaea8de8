mod commands;
mod input;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use stl_causation::{BcaumState, ClamState, DomainBounds, Plan, PlanError, QcaumState, ResetState};

use crate::input::{InputError, TraceStream};
use crate::output::{Emitter, Format, MonitorSummary, PlotWriter, StepRecord};

/// Streaming STL monitors over CSV traces.
#[derive(Debug, Parser)]
#[command(name = "monitor", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: Option<RunArgs>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time all four monitors on a benchmark specification and cross-check them.
    Bench(commands::BenchArgs),
    /// Write a synthetic trace (and optionally its specification).
    Synth(commands::SynthArgs),
    /// Generate the random corpus and run every cross-check on it.
    GenSuite(commands::GenSuiteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MonitorKind {
    Clam,
    Bcaum,
    Qcaum,
    Resm,
    All,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Specification file (one formula).
    #[arg(long)]
    spec: PathBuf,
    /// CSV trace with a leading `t` column, or `-` for standard input.
    #[arg(long)]
    trace: String,
    #[arg(long, value_enum, default_value = "all")]
    monitor: MonitorKind,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Sampling step; inferred from the first two timestamps when omitted.
    #[arg(long)]
    delta: Option<f64>,
    /// CSV `variable,min,max` with a-priori signal ranges.
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Tidy `t,series,value` CSV for plotting.
    #[arg(long)]
    plot_out: Option<PathBuf>,
    /// Reset the reset monitor only on violations.
    #[arg(long)]
    resm_violation_only: bool,
}

/// Rounds grid times so accumulated floating-point error does not show.
fn grid_time(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

struct Monitors {
    clam: Option<ClamState>,
    bcaum: Option<BcaumState>,
    qcaum: Option<QcaumState>,
    resm: Option<ResetState>,
}

impl Monitors {
    fn new(kind: MonitorKind, plan: Arc<Plan>, resm_violation_only: bool) -> Self {
        let on = |k: MonitorKind| kind == k || kind == MonitorKind::All;
        Monitors {
            clam: on(MonitorKind::Clam).then(|| ClamState::new(Arc::clone(&plan))),
            bcaum: on(MonitorKind::Bcaum).then(|| BcaumState::new(Arc::clone(&plan))),
            qcaum: on(MonitorKind::Qcaum).then(|| QcaumState::new(Arc::clone(&plan))),
            resm: on(MonitorKind::Resm).then(|| {
                ResetState::new(Arc::clone(&plan)).reset_on_satisfaction(!resm_violation_only)
            }),
        }
    }

    /// Steps every enabled monitor on the trace's current sample.
    fn step(&mut self, stream: &TraceStream) -> anyhow::Result<Vec<StepRecord>> {
        let view = stream.trace().full_view().context("no current sample")?;
        let t = grid_time(stream.trace().time_of(view.b_index()));
        let mut out = Vec::with_capacity(4);
        if let Some(m) = &mut self.clam {
            let start = Instant::now();
            let i = m.step(&view)?;
            let mut r = StepRecord::new(t, "clam", start.elapsed().as_nanos() as u64);
            r.upper = Some(i.upper);
            r.lower = Some(i.lower);
            r.verdict = Some(i.verdict().as_str());
            out.push(r);
        }
        if let Some(m) = &mut self.bcaum {
            let start = Instant::now();
            let c = m.step(&view)?;
            let mut r = StepRecord::new(t, "bcaum", start.elapsed().as_nanos() as u64);
            r.causation_verdict = Some(c);
            out.push(r);
        }
        if let Some(m) = &mut self.qcaum {
            let start = Instant::now();
            let o = m.step(&view)?;
            let mut r = StepRecord::new(t, "qcaum", start.elapsed().as_nanos() as u64);
            r.vio_distance = Some(o.vio_distance);
            r.sat_distance = Some(o.sat_distance);
            r.causation_verdict = Some(o.derived_verdict);
            out.push(r);
        }
        if let Some(m) = &mut self.resm {
            let start = Instant::now();
            let s = m.step(&view)?;
            let mut r = StepRecord::new(t, "resm", start.elapsed().as_nanos() as u64);
            r.upper = Some(s.interval.upper);
            r.lower = Some(s.interval.lower);
            r.verdict = Some(s.interval.verdict().as_str());
            r.episode = Some(s.episode);
            out.push(r);
        }
        Ok(out)
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let source =
        input::open(&args.trace).map_err(|e| InputError::Trace(format!("{}: {e}", args.trace)))?;
    let mut stream = TraceStream::new(source, args.delta)?;
    let vars: Vec<&str> = stream.variables().iter().map(String::as_str).collect();
    let formula = input::read_spec(&args.spec, &vars)?;
    let bounds = match &args.bounds {
        Some(p) => input::read_bounds(p)?,
        None => DomainBounds::new(),
    };
    let delta = stream.start()?;
    let plan = Plan::compile(&formula, delta, stream.variables(), &bounds, 0).map_err(
        |e: PlanError| InputError::Spec {
            path: args.spec.display().to_string(),
            message: e.to_string(),
        },
    )?;
    let mut monitors = Monitors::new(args.monitor, Arc::new(plan), args.resm_violation_only);

    let stdout = io::stdout().lock();
    let mut emitter = Emitter::new(args.format, BufWriter::new(stdout));
    emitter.header()?;
    let mut plot = match &args.plot_out {
        Some(p) => Some(PlotWriter::new(Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )))?),
        None => None,
    };
    let names = ["clam", "bcaum", "qcaum", "resm"];
    let mut summaries: Vec<MonitorSummary> = vec![MonitorSummary::default(); names.len()];

    let mut first = true;
    while stream.advance(&mut first)? {
        let records = monitors.step(&stream)?;
        emitter.emit(&output::merge(&records))?;
        for r in &records {
            let slot = names
                .iter()
                .position(|n| *n == r.monitor)
                .expect("known monitor");
            summaries[slot].record(r);
        }
        if let Some(p) = &mut plot {
            let bounds_from = records
                .iter()
                .find(|r| r.monitor == "clam")
                .or_else(|| records.iter().find(|r| r.upper.is_some()));
            if let Some(r) = bounds_from {
                p.series(r.t, "upper", r.upper.expect("interval monitor"))?;
                p.series(r.t, "lower", r.lower.expect("interval monitor"))?;
            }
            if let Some(r) = records.iter().find(|r| r.vio_distance.is_some()) {
                p.series(r.t, "vio_distance", r.vio_distance.expect("checked"))?;
                p.series(r.t, "sat_distance", r.sat_distance.expect("checked"))?;
            }
        }
    }
    if let Some(p) = plot {
        p.finish()?;
    }
    if let Some(m) = &monitors.resm {
        summaries[3].resets = m.resets().len();
    }
    let mut err = io::stderr().lock();
    for (name, s) in names.iter().zip(&summaries) {
        if s.steps > 0 {
            writeln!(err, "{}", s.line(name))?;
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<InputError>())
        .map(InputError::exit_code)
        .unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match (cli.command, cli.run) {
        (Some(Command::Bench(a)), _) => commands::bench(a),
        (Some(Command::Synth(a)), _) => commands::synth(a),
        (Some(Command::GenSuite(a)), _) => commands::gen_suite(a),
        (None, Some(a)) => run(a),
        (None, None) => {
            use clap::CommandFactory;
            Cli::command().print_help().ok();
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
