//! The `bench`, `synth` and `gen-suite` subcommands.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};

use stl_causation::specs::{afc_trace, at_trace, deceleration_trace, intro_trace};
use stl_causation::suite::{
    check_corpus, gen_suite as generate, CheckCounts, CheckOptions, Exec, JointRun,
};
use stl_causation::{
    parse_formula, BcaumState, BenchSpec, CausationVerdict, ClamState, DomainBounds, Plan,
    QcaumState, ResetState, Trace,
};

use crate::input::{self, InputError};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// AFC1, AFC2, AFC3 or AT1.
    #[arg(long)]
    spec: BenchSpec,
    /// CSV trace providing the specification's variables.
    #[arg(long)]
    trace: String,
    #[arg(long)]
    delta: Option<f64>,
    /// Also collect full epochs on every step (slow on long traces).
    #[arg(long)]
    full_epochs: bool,
}

fn per_step(times: &[Duration]) -> (f64, f64) {
    let n = times.len() as f64;
    let ns: Vec<f64> = times.iter().map(|d| d.as_nanos() as f64).collect();
    let mean = ns.iter().sum::<f64>() / n;
    let var = if ns.len() > 1 {
        ns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn timed(samples: &[&[f64]], mut step: impl FnMut(&[f64])) -> Vec<Duration> {
    samples
        .iter()
        .map(|s| {
            let start = Instant::now();
            step(s);
            start.elapsed()
        })
        .collect()
}

fn episodes(flags: impl Iterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    let mut last = 0;
    for (k, on) in flags.enumerate() {
        match (on, open) {
            (true, None) => open = Some(k),
            (false, Some(s)) => {
                out.push((s, k - 1));
                open = None;
            }
            _ => {}
        }
        last = k;
    }
    if let Some(s) = open {
        out.push((s, last));
    }
    out
}

fn check_failures(c: &CheckCounts) -> Vec<String> {
    let fields = [
        ("interval monotonicity", c.monotonicity),
        ("verdict regression", c.verdict_regression),
        ("causation vs classic verdict", c.classic_vs_causation),
        ("distance signs", c.distance_signs),
        ("interval reconstruction", c.reconstruction),
        ("epoch emptiness", c.epoch_emptiness),
        ("first conclusion", c.first_conclusion),
        ("window kernels", c.kernel),
        ("epoch membership", c.membership),
        ("reset episode monotonicity", c.reset_monotonicity),
    ];
    fields
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(name, n)| format!("{name}: {n}"))
        .collect()
}

pub fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let trace = input::read_trace(&args.trace, args.delta)?;
    for v in args.spec.variables() {
        if trace.variable_index(v).is_err() {
            return Err(InputError::Trace(format!(
                "{}: {} needs column {v:?}",
                args.trace, args.spec
            ))
            .into());
        }
    }
    let vars: Vec<&str> = trace.variables().iter().map(String::as_str).collect();
    let formula = parse_formula(args.spec.text(), &vars).expect("built-in specification");
    let plan = Arc::new(
        Plan::compile(
            &formula,
            trace.step(),
            trace.variables(),
            &DomainBounds::new(),
            0,
        )
        .context("specification does not fit the trace's sampling step")?,
    );
    let samples: Vec<&[f64]> = (0..trace.len())
        .map(|k| trace.sample(k).expect("in range"))
        .collect();

    let mut clam = ClamState::new(Arc::clone(&plan));
    let mut bcaum = BcaumState::new(Arc::clone(&plan));
    let mut qcaum = QcaumState::new(Arc::clone(&plan));
    let mut resm = ResetState::new(Arc::clone(&plan));
    let mut causation = Vec::with_capacity(samples.len());
    let rows = [
        (
            "clam",
            timed(&samples, |s| {
                clam.step_values(s);
            }),
        ),
        (
            "bcaum",
            timed(&samples, |s| causation.push(bcaum.step_values(s))),
        ),
        (
            "qcaum",
            timed(&samples, |s| {
                qcaum.step_values(s);
            }),
        ),
        (
            "resm",
            timed(&samples, |s| {
                resm.step_values(s);
            }),
        ),
    ];

    let options = CheckOptions {
        compare_kernels: true,
        full_epochs: args.full_epochs,
    };
    let mut joint = JointRun::new(Arc::clone(&plan), options);
    for s in &samples {
        joint.step(s);
    }
    let counts = joint.finish();

    let mut out = io::stdout().lock();
    writeln!(out, "spec {}: {}", args.spec, args.spec.text())?;
    writeln!(
        out,
        "trace: {} samples, step {}, horizon {} samples",
        trace.len(),
        trace.step(),
        plan.horizon()
    )?;
    for (name, times) in &rows {
        let total: Duration = times.iter().sum();
        let (mean, sd) = per_step(times);
        writeln!(
            out,
            "{name:>6}: total {:>10.3} ms, per step {:>9.0} ns (stdev {:.0})",
            total.as_secs_f64() * 1e3,
            mean,
            sd
        )?;
    }
    let final_interval = clam.interval_at(0);
    writeln!(
        out,
        "final interval {final_interval}, verdict {}",
        final_interval.verdict()
    )?;
    let time = |k: usize| input::format_time(trace.time_of(k));
    for (label, kind) in [
        ("violation", CausationVerdict::Violation),
        ("satisfaction", CausationVerdict::Satisfaction),
    ] {
        let eps = episodes(causation.iter().map(|c| *c == kind));
        let spans: Vec<String> = eps
            .iter()
            .map(|&(s, e)| format!("[{}, {}]", time(s), time(e)))
            .collect();
        writeln!(
            out,
            "{label} causation episodes: {} {}",
            eps.len(),
            spans.join(" ")
        )?;
    }
    let resets: Vec<String> = resm.resets().iter().map(|&k| time(k)).collect();
    writeln!(out, "resets: {} [{}]", resets.len(), resets.join(", "))?;
    let failures = check_failures(&counts);
    if failures.is_empty() {
        writeln!(out, "cross-checks: {} steps, all passed", counts.steps)?;
        Ok(())
    } else {
        bail!("cross-checks failed: {}", failures.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Speed/RPM with two RPM excursions.
    At1,
    /// Air-fuel ratio with one deviation spike.
    Afc,
    /// Air-fuel ratio that stays within tolerance.
    AfcCompliant,
    /// Speed with two excursions above 10.
    Intro,
    /// Speed and acceleration for the deceleration requirement.
    Deceleration,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    scenario: Scenario,
    /// Output CSV, `-` for standard output.
    #[arg(long, default_value = "-")]
    out: String,
    /// Also write the matching specification here.
    #[arg(long)]
    spec_out: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
}

pub fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let delta = args.delta.unwrap_or(0.1);
    let (trace, spec): (Trace, &str) = match args.scenario {
        Scenario::At1 => (
            at_trace(
                delta,
                args.duration.unwrap_or(30.0),
                &[(5.0, 10.0), (16.0, 22.0)],
            ),
            BenchSpec::At1.text(),
        ),
        Scenario::Afc => (
            afc_trace(delta, args.duration.unwrap_or(50.0), &[(20.0, 22.5, 0.3)]),
            BenchSpec::Afc1.text(),
        ),
        Scenario::AfcCompliant => (
            afc_trace(delta, args.duration.unwrap_or(50.0), &[]),
            BenchSpec::Afc1.text(),
        ),
        Scenario::Intro => (intro_trace(), "alw_[0,100] (v < 10)"),
        Scenario::Deceleration => (
            deceleration_trace(),
            "alw_[0,100] (v > 10 -> ev_[0,5] (a < 0))",
        ),
    };
    if args.out == "-" {
        input::write_trace(&trace, io::stdout().lock())?;
    } else {
        let f = File::create(&args.out).with_context(|| format!("cannot create {}", args.out))?;
        input::write_trace(&trace, BufWriter::new(f))?;
    }
    if let Some(p) = args.spec_out {
        fs::write(&p, format!("{spec}\n"))
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenSuiteArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Check cases one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
    /// Write each case as `case_N.stl`, `case_N.csv` (and `case_N.bounds.csv`) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn gen_suite(args: GenSuiteArgs) -> anyhow::Result<()> {
    if args.count == 0 {
        bail!("--count must be positive");
    }
    let cases = generate(args.seed, args.count);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for c in &cases {
            fs::write(
                dir.join(format!("case_{}.stl", c.id)),
                format!("{}\n", c.formula),
            )?;
            let f = File::create(dir.join(format!("case_{}.csv", c.id)))?;
            input::write_trace(&c.trace, BufWriter::new(f))?;
            if !c.bounds.is_empty() {
                let mut w = csv::Writer::from_path(dir.join(format!("case_{}.bounds.csv", c.id)))?;
                w.write_record(["variable", "min", "max"])?;
                for v in c.trace.variables() {
                    if let Some((lo, hi)) = c.bounds.get(v) {
                        w.write_record([v.clone(), lo.to_string(), hi.to_string()])?;
                    }
                }
                w.flush()?;
            }
        }
    }
    let exec = if args.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let start = Instant::now();
    let reports = check_corpus(&cases, exec);
    let elapsed = start.elapsed();
    let mut out = io::stdout().lock();
    let mut total = CheckCounts::default();
    let mut bad = 0;
    for r in &reports {
        total.add(&r.counts);
        let mut problems = check_failures(&r.counts);
        if !r.offline_agrees() {
            problems.push(format!(
                "final interval {} but offline robustness {}",
                r.final_interval, r.offline
            ));
        }
        if !problems.is_empty() {
            bad += 1;
            writeln!(out, "case {}: {}", r.id, problems.join(", "))?;
        }
    }
    let until_rooted = cases
        .iter()
        .filter(|c| matches!(c.formula, stl_causation::Formula::Until(..)))
        .count();
    writeln!(
        out,
        "{} cases ({} until-rooted), {} steps, {} failing, {:.2?}",
        cases.len(),
        until_rooted,
        total.steps,
        bad,
        elapsed
    )?;
    if bad > 0 {
        bail!("{bad} cases failed their cross-checks");
    }
    Ok(())
}
