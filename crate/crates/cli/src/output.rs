//! Per-step records, their json-lines/CSV encodings, plot data and the
//! summary footer.

use std::io::{self, Write};

use serde_json::{Map, Value};
use stl_causation::CausationVerdict;

pub const CSV_HEADER: [&str; 10] = [
    "t",
    "monitor",
    "upper",
    "lower",
    "verdict",
    "vio_distance",
    "sat_distance",
    "causation_verdict",
    "episode",
    "monitor_time_ns",
];

/// One monitor's output for one sample. Fields the monitor does not produce
/// are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub monitor: &'static str,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    pub verdict: Option<&'static str>,
    pub vio_distance: Option<f64>,
    pub sat_distance: Option<f64>,
    pub causation_verdict: Option<CausationVerdict>,
    pub episode: Option<usize>,
    pub monitor_time_ns: u64,
}

impl StepRecord {
    pub fn new(t: f64, monitor: &'static str, monitor_time_ns: u64) -> Self {
        StepRecord {
            t,
            monitor,
            upper: None,
            lower: None,
            verdict: None,
            vio_distance: None,
            sat_distance: None,
            causation_verdict: None,
            episode: None,
            monitor_time_ns,
        }
    }
}

/// Folds the per-monitor parts of one sample into a single record. Earlier
/// parts win where two monitors report the same field, so the classic
/// interval takes precedence over the reset monitor's and the Boolean
/// causation verdict over the one derived from distances.
pub fn merge(parts: &[StepRecord]) -> StepRecord {
    let mut r = parts[0].clone();
    if parts.len() > 1 {
        r.monitor = "all";
    }
    for p in &parts[1..] {
        r.upper = r.upper.or(p.upper);
        r.lower = r.lower.or(p.lower);
        r.verdict = r.verdict.or(p.verdict);
        r.vio_distance = r.vio_distance.or(p.vio_distance);
        r.sat_distance = r.sat_distance.or(p.sat_distance);
        r.causation_verdict = r.causation_verdict.or(p.causation_verdict);
        r.episode = r.episode.or(p.episode);
        r.monitor_time_ns += p.monitor_time_ns;
    }
    r
}

/// JSON has no infinity literal, so infinities become strings.
pub fn num_json(v: f64) -> Value {
    if v == f64::INFINITY {
        Value::from("inf")
    } else if v == f64::NEG_INFINITY {
        Value::from("-inf")
    } else {
        Value::from(v)
    }
}

pub fn num_text(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub struct Emitter<W: Write> {
    format: Format,
    out: W,
}

impl<W: Write> Emitter<W> {
    pub fn new(format: Format, out: W) -> Self {
        Emitter { format, out }
    }

    pub fn header(&mut self) -> io::Result<()> {
        if self.format == Format::Csv {
            writeln!(self.out, "{}", CSV_HEADER.join(","))?;
            self.out.flush()?;
        }
        Ok(())
    }

    /// Writes one record and flushes so consumers see it at sample latency.
    pub fn emit(&mut self, r: &StepRecord) -> io::Result<()> {
        match self.format {
            Format::Json => {
                let mut m = Map::new();
                m.insert("t".into(), Value::from(r.t));
                m.insert("monitor".into(), Value::from(r.monitor));
                let mut put = |k: &str, v: Option<Value>| {
                    if let Some(v) = v {
                        m.insert(k.into(), v);
                    }
                };
                put("upper", r.upper.map(num_json));
                put("lower", r.lower.map(num_json));
                put("verdict", r.verdict.map(Value::from));
                put("vio_distance", r.vio_distance.map(num_json));
                put("sat_distance", r.sat_distance.map(num_json));
                put(
                    "causation_verdict",
                    r.causation_verdict.map(|c| c.as_str().into()),
                );
                put("episode", r.episode.map(Value::from));
                m.insert("monitor_time_ns".into(), Value::from(r.monitor_time_ns));
                serde_json::to_writer(&mut self.out, &Value::Object(m))?;
                writeln!(self.out)?;
            }
            Format::Csv => {
                let opt = |v: Option<f64>| v.map(num_text).unwrap_or_default();
                let row = [
                    r.t.to_string(),
                    r.monitor.to_string(),
                    opt(r.upper),
                    opt(r.lower),
                    r.verdict.unwrap_or_default().to_string(),
                    opt(r.vio_distance),
                    opt(r.sat_distance),
                    r.causation_verdict
                        .map(|c| c.as_str().to_string())
                        .unwrap_or_default(),
                    r.episode.map(|e| e.to_string()).unwrap_or_default(),
                    r.monitor_time_ns.to_string(),
                ];
                let mut w = csv::WriterBuilder::new()
                    .has_headers(false)
                    .from_writer(&mut self.out);
                w.write_record(&row)?;
                w.flush()?;
            }
        }
        self.out.flush()
    }
}

/// Tidy `t,series,value` rows for plotting.
pub struct PlotWriter {
    w: csv::Writer<Box<dyn Write>>,
}

impl PlotWriter {
    pub fn new(out: Box<dyn Write>) -> io::Result<Self> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "series", "value"])?;
        Ok(PlotWriter { w })
    }

    pub fn series(&mut self, t: f64, name: &str, value: f64) -> io::Result<()> {
        self.w
            .write_record([t.to_string(), name.to_string(), num_text(value)])?;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.w.flush()
    }
}

/// Aggregates for the footer printed after a run.
#[derive(Debug, Clone, Default)]
pub struct MonitorSummary {
    pub steps: usize,
    total_ns: f64,
    total_sq: f64,
    last_verdict: Option<&'static str>,
    pub verdict_transitions: usize,
    last_causation: Option<CausationVerdict>,
    pub violation_episodes: usize,
    pub satisfaction_episodes: usize,
    pub resets: usize,
}

impl MonitorSummary {
    pub fn record(&mut self, r: &StepRecord) {
        self.steps += 1;
        let ns = r.monitor_time_ns as f64;
        self.total_ns += ns;
        self.total_sq += ns * ns;
        if let Some(v) = r.verdict {
            if self.last_verdict.is_some_and(|p| p != v) {
                self.verdict_transitions += 1;
            }
            self.last_verdict = Some(v);
        }
        if let Some(c) = r.causation_verdict {
            if self.last_causation != Some(c) {
                match c {
                    CausationVerdict::Violation => self.violation_episodes += 1,
                    CausationVerdict::Satisfaction => self.satisfaction_episodes += 1,
                    CausationVerdict::Irrelevant => {}
                }
            }
            self.last_causation = Some(c);
        }
    }

    pub fn mean_ns(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_ns / self.steps as f64
        }
    }

    pub fn stdev_ns(&self) -> f64 {
        if self.steps < 2 {
            return 0.0;
        }
        let n = self.steps as f64;
        let mean = self.total_ns / n;
        ((self.total_sq / n - mean * mean).max(0.0) * n / (n - 1.0)).sqrt()
    }

    pub fn total_ms(&self) -> f64 {
        self.total_ns / 1e6
    }

    pub fn line(&self, name: &str) -> String {
        let mut s = format!(
            "{name}: {} steps, {:.3} ms total, {:.0} ns/step mean, {:.0} ns stdev",
            self.steps,
            self.total_ms(),
            self.mean_ns(),
            self.stdev_ns()
        );
        if self.last_verdict.is_some() {
            s += &format!(
                ", final verdict {}, {} verdict transitions",
                self.last_verdict.unwrap_or("unknown"),
                self.verdict_transitions
            );
        }
        if self.last_causation.is_some() {
            s += &format!(
                ", {} violation / {} satisfaction causation episodes",
                self.violation_episodes, self.satisfaction_episodes
            );
        }
        if name == "resm" {
            s += &format!(", {} resets", self.resets);
        }
        s
    }
}
