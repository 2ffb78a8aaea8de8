//! Reading spec files, bounds tables and CSV traces.

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::Path;

use thiserror::Error;

use stl_causation::{parse_formula, DomainBounds, Formula, ParseError, Trace, TraceError};

/// Errors grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {message}")]
    Spec { path: String, message: String },
    #[error("{0}")]
    Trace(String),
}

impl InputError {
    pub fn exit_code(&self) -> u8 {
        match self {
            InputError::Spec { .. } => 2,
            InputError::Trace(_) => 3,
        }
    }
}

fn trace_err(msg: impl Into<String>) -> InputError {
    InputError::Trace(msg.into())
}

pub fn open(path: &str) -> io::Result<Box<dyn Read>> {
    if path == "-" {
        Ok(Box::new(io::stdin().lock()))
    } else {
        Ok(Box::new(BufReader::new(File::open(path)?)))
    }
}

pub fn read_spec(path: &Path, variables: &[&str]) -> anyhow::Result<Formula> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read spec {}: {e}", path.display()))?;
    parse_formula(&text, variables).map_err(|e: ParseError| {
        InputError::Spec {
            path: path.display().to_string(),
            message: e.to_string(),
        }
        .into()
    })
}

/// Bounds table: CSV with header `variable,min,max`.
pub fn read_bounds(path: &Path) -> anyhow::Result<DomainBounds> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| trace_err(format!("{}: {e}", path.display())))?;
    let mut bounds = DomainBounds::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| trace_err(format!("{}: {e}", path.display())))?;
        let bad = || {
            trace_err(format!(
                "{}: row {}: expected variable,min,max",
                path.display(),
                line + 2
            ))
        };
        if row.len() != 3 {
            return Err(bad().into());
        }
        let min: f64 = row[1].parse().map_err(|_| bad())?;
        let max: f64 = row[2].parse().map_err(|_| bad())?;
        if min.is_nan() || max.is_nan() || min > max {
            return Err(bad().into());
        }
        bounds.insert(&row[0], min, max);
    }
    Ok(bounds)
}

/// Streams a CSV trace whose first column is time and whose remaining columns
/// are signal variables. Keeps only the current sample in memory.
pub struct TraceStream {
    reader: csv::Reader<Box<dyn Read>>,
    variables: Vec<String>,
    record: csv::StringRecord,
    pending: Option<(f64, Vec<f64>)>,
    trace: Option<Trace>,
    delta: Option<f64>,
    line: usize,
}

impl TraceStream {
    pub fn new(source: Box<dyn Read>, delta: Option<f64>) -> Result<Self, InputError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let headers = reader
            .headers()
            .map_err(|e| trace_err(format!("cannot read header: {e}")))?
            .clone();
        if headers.is_empty() || headers.iter().all(str::is_empty) {
            return Err(trace_err("empty trace"));
        }
        if !matches!(&headers[0], "t" | "time") {
            return Err(trace_err(format!(
                "first column must be `t` or `time`, found {:?}",
                &headers[0]
            )));
        }
        if headers.len() < 2 {
            return Err(trace_err("trace has no signal columns"));
        }
        if let Some(d) = delta {
            if !(d.is_finite() && d > 0.0) {
                return Err(trace_err(format!("invalid step {d}")));
            }
        }
        Ok(TraceStream {
            reader,
            variables: headers.iter().skip(1).map(str::to_owned).collect(),
            record: csv::StringRecord::new(),
            pending: None,
            trace: None,
            delta,
            line: 1,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    fn read_row(&mut self) -> Result<Option<(f64, Vec<f64>)>, InputError> {
        let more = self
            .reader
            .read_record(&mut self.record)
            .map_err(|e| trace_err(format!("line {}: {e}", self.line + 1)))?;
        if !more {
            return Ok(None);
        }
        self.line += 1;
        let line = self.line;
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| trace_err(format!("line {line}: invalid number {s:?}")))
        };
        let t = num(&self.record[0])?;
        let values = self
            .record
            .iter()
            .skip(1)
            .map(num)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some((t, values)))
    }

    /// Reads until the sampling step is known and returns it. Fails on an
    /// empty trace.
    pub fn start(&mut self) -> Result<f64, InputError> {
        let first = self.read_row()?.ok_or_else(|| trace_err("empty trace"))?;
        let delta = match self.delta {
            Some(d) => d,
            None => match self.read_row()? {
                Some(second) => {
                    let d = second.0 - first.0;
                    if !(d > 0.0) {
                        return Err(trace_err(format!(
                            "line 3: time {} does not increase",
                            second.0
                        )));
                    }
                    self.pending = Some(second);
                    d
                }
                None => 1.0,
            },
        };
        let names: Vec<&str> = self.variables.iter().map(String::as_str).collect();
        let trace = Trace::new(delta, names)
            .map_err(|e| trace_err(e.to_string()))?
            .with_start(first.0)
            .with_retention(0);
        self.delta = Some(delta);
        self.trace = Some(trace);
        self.push(first)?;
        Ok(delta)
    }

    fn push(&mut self, (t, values): (f64, Vec<f64>)) -> Result<(), InputError> {
        let trace = self.trace.as_mut().expect("started");
        let k = trace.len();
        let expected = trace.time_of(k);
        let delta = trace.step();
        if (t - expected).abs() > 1e-6 * delta + 1e-9 * expected.abs() {
            return Err(trace_err(format!(
                "line {}: time {t} breaks uniform sampling (expected {expected})",
                self.line
            )));
        }
        trace
            .append(values)
            .map_err(|e: TraceError| trace_err(format!("line {}: {e}", self.line)))?;
        Ok(())
    }

    /// Advances to the next sample; `false` at end of input. The first call
    /// after [`TraceStream::start`] yields the first sample.
    pub fn advance(&mut self, first: &mut bool) -> Result<bool, InputError> {
        if std::mem::take(first) {
            return Ok(true);
        }
        let row = match self.pending.take() {
            Some(r) => Some(r),
            None => self.read_row()?,
        };
        match row {
            Some(r) => {
                self.push(r)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    pub fn trace(&self) -> &Trace {
        self.trace.as_ref().expect("started")
    }
}

/// Reads a whole CSV trace into memory.
pub fn read_trace(path: &str, delta: Option<f64>) -> anyhow::Result<Trace> {
    let source = open(path).map_err(|e| trace_err(format!("{path}: {e}")))?;
    let mut stream = TraceStream::new(source, delta)?;
    stream.start()?;
    let names: Vec<String> = stream.variables().to_vec();
    let first_trace = stream.trace();
    let mut full = Trace::new(first_trace.step(), names)
        .map_err(|e| trace_err(e.to_string()))?
        .with_start(first_trace.t0());
    let mut first = true;
    while stream.advance(&mut first)? {
        let current = stream.trace().full_view().expect("non-empty");
        full.append(current.current().to_vec())
            .map_err(|e| trace_err(e.to_string()))?;
    }
    Ok(full)
}

/// Writes `trace` as CSV with a leading time column.
pub fn write_trace(trace: &Trace, out: impl io::Write) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(trace.variables().iter().cloned());
    w.write_record(&header)?;
    for k in 0..trace.len() {
        let mut row = vec![format_time(trace.time_of(k))];
        row.extend(trace.sample(k)?.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Times are printed rounded to 1e-9 so `0.30000000000000004` reads as `0.3`.
pub fn format_time(t: f64) -> String {
    let r = (t * 1e9).round() / 1e9;
    r.to_string()
}
