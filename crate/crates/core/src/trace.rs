//! Uniformly sampled multi-variable signals, prefix views and domain bounds.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::formula::{Atom, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("sampling step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("expected {expected} values per sample, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("non-finite value {value} for variable {variable:?}")]
    NonFinite { variable: String, value: f64 },
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("sample {index} is beyond the prefix ending at {last}")]
    BeyondPrefix { index: usize, last: usize },
    #[error("sample {index} has been evicted (oldest retained is {oldest})")]
    Evicted { index: usize, oldest: usize },
    #[error("trace is empty")]
    Empty,
}

/// Append-only signal with sample `k` at time `t0 + k * step`.
///
/// With a retention limit set, only the newest `retention + 1` samples are
/// kept; indices stay stable and older ones report [`TraceError::Evicted`].
#[derive(Debug, Clone)]
pub struct Trace {
    step: f64,
    t0: f64,
    variables: Vec<String>,
    samples: VecDeque<Vec<f64>>,
    first: usize,
    retention: Option<usize>,
}

impl Trace {
    pub fn new<S: Into<String>>(
        step: f64,
        variables: impl IntoIterator<Item = S>,
    ) -> Result<Self, TraceError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(TraceError::BadStep(step));
        }
        Ok(Trace {
            step,
            t0: 0.0,
            variables: variables.into_iter().map(Into::into).collect(),
            samples: VecDeque::new(),
            first: 0,
            retention: None,
        })
    }

    pub fn with_start(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Keeps at most `samples + 1` samples: the current one plus `samples` of history.
    pub fn with_retention(mut self, samples: usize) -> Self {
        self.retention = Some(samples);
        self.evict();
        self
    }

    /// Builds a trace from one column per variable.
    pub fn from_columns(step: f64, columns: &[(&str, Vec<f64>)]) -> Result<Self, TraceError> {
        let mut trace = Trace::new(step, columns.iter().map(|(n, _)| *n))?;
        let len = columns.first().map_or(0, |(_, c)| c.len());
        for k in 0..len {
            let row: Vec<f64> = columns
                .iter()
                .map(|(_, c)| c.get(k).copied().unwrap_or(f64::NAN))
                .collect();
            trace.append(row)?;
        }
        Ok(trace)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn variable_index(&self, name: &str) -> Result<usize, TraceError> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| TraceError::UnknownVariable(name.to_owned()))
    }

    /// Total number of samples ever appended.
    pub fn len(&self) -> usize {
        self.first + self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn append(&mut self, values: Vec<f64>) -> Result<usize, TraceError> {
        if values.len() != self.variables.len() {
            return Err(TraceError::Arity {
                expected: self.variables.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TraceError::NonFinite {
                variable: self.variables[i].clone(),
                value: values[i],
            });
        }
        self.samples.push_back(values);
        self.evict();
        Ok(self.len() - 1)
    }

    fn evict(&mut self) {
        if let Some(keep) = self.retention {
            while self.samples.len() > keep + 1 {
                self.samples.pop_front();
                self.first += 1;
            }
        }
    }

    /// The sample vector at index `k`.
    pub fn sample(&self, k: usize) -> Result<&[f64], TraceError> {
        if k < self.first {
            return Err(TraceError::Evicted {
                index: k,
                oldest: self.first,
            });
        }
        self.samples
            .get(k - self.first)
            .map(Vec::as_slice)
            .ok_or(TraceError::BeyondPrefix {
                index: k,
                last: self.len().saturating_sub(1),
            })
    }

    /// View of the prefix ending at sample `b`.
    pub fn view(&self, b: usize) -> Result<PrefixView<'_>, TraceError> {
        if b >= self.len() {
            return Err(if self.is_empty() {
                TraceError::Empty
            } else {
                TraceError::BeyondPrefix {
                    index: b,
                    last: self.len() - 1,
                }
            });
        }
        Ok(PrefixView { trace: self, b })
    }

    /// View of everything appended so far.
    pub fn full_view(&self) -> Result<PrefixView<'_>, TraceError> {
        match self.len() {
            0 => Err(TraceError::Empty),
            n => self.view(n - 1),
        }
    }
}

/// The partial signal on samples `0..=b`.
#[derive(Debug, Clone, Copy)]
pub struct PrefixView<'a> {
    trace: &'a Trace,
    b: usize,
}

impl<'a> PrefixView<'a> {
    pub fn trace(&self) -> &'a Trace {
        self.trace
    }

    pub fn b_index(&self) -> usize {
        self.b
    }

    /// Sample vector at the last instant of the prefix.
    pub fn current(&self) -> &'a [f64] {
        self.trace
            .sample(self.b)
            .expect("the view's own last sample is always retained")
    }

    pub fn sample(&self, k: usize) -> Result<&'a [f64], TraceError> {
        if k > self.b {
            return Err(TraceError::BeyondPrefix {
                index: k,
                last: self.b,
            });
        }
        self.trace.sample(k)
    }

    pub fn value_at(&self, variable: &str, k: usize) -> Result<f64, TraceError> {
        let i = self.trace.variable_index(variable)?;
        Ok(self.sample(k)?[i])
    }
}

/// Optional per-variable value ranges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DomainBounds {
    ranges: BTreeMap<String, (f64, f64)>,
}

impl DomainBounds {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `[min, max]` for a variable; the endpoints are swapped if reversed.
    pub fn insert(&mut self, variable: impl Into<String>, min: f64, max: f64) {
        let (lo, hi) = if min <= max { (min, max) } else { (max, min) };
        self.ranges.insert(variable.into(), (lo, hi));
    }

    pub fn with(mut self, variable: impl Into<String>, min: f64, max: f64) -> Self {
        self.insert(variable, min, max);
        self
    }

    pub fn get(&self, variable: &str) -> Option<(f64, f64)> {
        self.ranges.get(variable).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

/// A-priori robustness range of an atom, by interval arithmetic over the
/// variable box. Any unbounded variable gives `(-inf, +inf)`.
pub fn atom_bounds(atom: &Atom, bounds: &DomainBounds) -> (f64, f64) {
    expr_range(&atom.expr, bounds).unwrap_or((f64::NEG_INFINITY, f64::INFINITY))
}

fn expr_range(e: &Expr, bounds: &DomainBounds) -> Option<(f64, f64)> {
    Some(match e {
        Expr::Const(c) => (*c, *c),
        Expr::Var(name) => bounds.get(name)?,
        Expr::Neg(a) => {
            let (lo, hi) = expr_range(a, bounds)?;
            (-hi, -lo)
        }
        Expr::Add(a, b) => {
            let (al, ah) = expr_range(a, bounds)?;
            let (bl, bh) = expr_range(b, bounds)?;
            (al + bl, ah + bh)
        }
        Expr::Sub(a, b) => {
            let (al, ah) = expr_range(a, bounds)?;
            let (bl, bh) = expr_range(b, bounds)?;
            (al - bh, ah - bl)
        }
        Expr::Mul(a, b) => {
            let (al, ah) = expr_range(a, bounds)?;
            let (bl, bh) = expr_range(b, bounds)?;
            let p = [al * bl, al * bh, ah * bl, ah * bh];
            (
                p.iter().copied().fold(f64::INFINITY, f64::min),
                p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        }
        Expr::Abs(a) => {
            let (lo, hi) = expr_range(a, bounds)?;
            if lo >= 0.0 {
                (lo, hi)
            } else if hi <= 0.0 {
                (-hi, -lo)
            } else {
                (0.0, hi.max(-lo))
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, Formula};

    #[test]
    fn append_assigns_consecutive_indices() {
        let mut t = Trace::new(0.5, ["x"]).unwrap().with_start(2.0);
        assert_eq!(t.append(vec![1.0]).unwrap(), 0);
        assert_eq!(t.append(vec![2.0]).unwrap(), 1);
        assert_eq!(t.time_of(0), 2.0);
        assert_eq!(t.time_of(1), 2.5);
    }

    #[test]
    fn append_rejects_bad_rows() {
        let mut t = Trace::new(1.0, ["x", "y"]).unwrap();
        assert_eq!(
            t.append(vec![1.0]),
            Err(TraceError::Arity {
                expected: 2,
                got: 1
            })
        );
        assert!(matches!(
            t.append(vec![1.0, f64::NAN]),
            Err(TraceError::NonFinite { .. })
        ));
        assert!(t.is_empty());
    }

    #[test]
    fn value_at_respects_prefix() {
        let t = Trace::from_columns(1.0, &[("x", vec![1.0, 2.0, -1.0, 4.0])]).unwrap();
        let v = t.view(2).unwrap();
        assert_eq!(v.value_at("x", 1).unwrap(), 2.0);
        assert_eq!(
            v.value_at("x", 3),
            Err(TraceError::BeyondPrefix { index: 3, last: 2 })
        );
        assert_eq!(v.current(), &[-1.0]);
    }

    #[test]
    fn eviction_keeps_indices_stable() {
        let mut t = Trace::new(1.0, ["x"]).unwrap().with_retention(2);
        for k in 0..5 {
            assert_eq!(t.append(vec![k as f64]).unwrap(), k);
        }
        let v = t.full_view().unwrap();
        assert_eq!(
            v.value_at("x", 0),
            Err(TraceError::Evicted {
                index: 0,
                oldest: 2
            })
        );
        assert_eq!(v.value_at("x", 2).unwrap(), 2.0);
        assert_eq!(v.value_at("x", 4).unwrap(), 4.0);
    }

    #[test]
    fn bounds_of_affine_atoms() {
        let f = parse_formula("v < 10", &["v"]).unwrap();
        let Formula::Atom(a) = &f else { panic!() };
        let b = DomainBounds::new().with("v", 0.0, 20.0);
        assert_eq!(atom_bounds(a, &b), (-10.0, 10.0));
        assert_eq!(
            atom_bounds(a, &DomainBounds::new()),
            (f64::NEG_INFINITY, f64::INFINITY)
        );
    }

    #[test]
    fn bounds_of_abs_leg() {
        let f = parse_formula("abs(AF - AFref) < 0.1", &["AF", "AFref"]).unwrap();
        let b = DomainBounds::new()
            .with("AF", 0.0, 2.0)
            .with("AFref", 0.0, 2.0);
        let atoms = f.atoms();
        let (lo, hi) = atom_bounds(atoms[0], &b);
        assert!((lo + 1.9).abs() < 1e-12 && (hi - 2.1).abs() < 1e-12);
    }

    #[test]
    fn bounds_of_abs_and_product() {
        let b = DomainBounds::new().with("x", -3.0, 2.0);
        let a = Atom::new(Expr::abs(Expr::var("x")));
        assert_eq!(atom_bounds(&a, &b), (0.0, 3.0));
        let m = Atom::new(Expr::mul(Expr::var("x"), Expr::var("x")));
        assert_eq!(atom_bounds(&m, &b), (-6.0, 9.0));
    }
}
