//! The classic interval online monitor and its three-valued verdict.

use std::fmt;
use std::ops::Neg;
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{Engine, WindowKernel};
use crate::formula::Formula;
use crate::oracle::{robustness, OracleError};
use crate::plan::{Plan, PlanError};
use crate::trace::{DomainBounds, PrefixView, Trace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("expected sample {expected}, got {got}")]
    NonContiguous { expected: usize, got: usize },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Closed interval `[lower, upper]` over the extended reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessInterval {
    pub lower: f64,
    pub upper: f64,
}

impl RobustnessInterval {
    pub fn new(lower: f64, upper: f64) -> Self {
        RobustnessInterval { lower, upper }
    }

    pub fn point(v: f64) -> Self {
        Self::new(v, v)
    }

    pub fn min(self, other: Self) -> Self {
        Self::new(self.lower.min(other.lower), self.upper.min(other.upper))
    }

    pub fn max(self, other: Self) -> Self {
        Self::new(self.lower.max(other.lower), self.upper.max(other.upper))
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn verdict(&self) -> Verdict {
        derive_verdict(*self)
    }
}

impl Neg for RobustnessInterval {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.upper, -self.lower)
    }
}

impl fmt::Display for RobustnessInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lower, self.upper)
    }
}

/// Three-valued online verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::True => "true",
            Verdict::False => "false",
            Verdict::Unknown => "unknown",
        }
    }

    pub fn is_conclusive(self) -> bool {
        self != Verdict::Unknown
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `upper < 0` is a violation, `lower > 0` a satisfaction, anything else
/// (including a bound exactly at zero) is inconclusive.
pub fn derive_verdict(i: RobustnessInterval) -> Verdict {
    if i.upper < 0.0 {
        Verdict::False
    } else if i.lower > 0.0 {
        Verdict::True
    } else {
        Verdict::Unknown
    }
}

/// Streaming interval monitor evaluated at anchor 0.
#[derive(Debug, Clone)]
pub struct ClamState {
    engine: Engine,
}

impl ClamState {
    pub fn new(plan: Arc<Plan>) -> Self {
        Self::with_kernel(plan, WindowKernel::default())
    }

    pub fn with_kernel(plan: Arc<Plan>, kernel: WindowKernel) -> Self {
        ClamState {
            engine: Engine::new(plan, kernel, false),
        }
    }

    /// Compiles `formula` against the variables and step of `trace`.
    pub fn for_trace(
        formula: &Formula,
        trace: &Trace,
        bounds: &DomainBounds,
    ) -> Result<Self, MonitorError> {
        let plan = Plan::compile(formula, trace.step(), trace.variables(), bounds, 0)?;
        Ok(Self::new(Arc::new(plan)))
    }

    pub fn plan(&self) -> &Arc<Plan> {
        self.engine.plan()
    }

    pub fn kernel(&self) -> WindowKernel {
        self.engine.kernel()
    }

    /// Index of the next sample this monitor expects.
    pub fn next_index(&self) -> usize {
        self.engine.next_index()
    }

    pub fn step(&mut self, view: &PrefixView<'_>) -> Result<RobustnessInterval, MonitorError> {
        check_contiguous(self.engine.next_index(), view)?;
        Ok(self.step_values(view.current()))
    }

    /// Steps on a raw sample vector laid out like the plan's variables.
    pub fn step_values(&mut self, sample: &[f64]) -> RobustnessInterval {
        self.engine.step(sample);
        self.interval_at(0)
    }

    /// Current interval of the whole formula at `anchor`.
    pub fn interval_at(&self, anchor: usize) -> RobustnessInterval {
        let root = self.engine.plan().root();
        RobustnessInterval::new(self.engine.lo(root, anchor), self.engine.up(root, anchor))
    }

    pub(crate) fn engine(&self) -> &Engine {
        &self.engine
    }
}

pub(crate) fn check_contiguous(expected: usize, view: &PrefixView<'_>) -> Result<(), MonitorError> {
    if view.b_index() != expected {
        return Err(MonitorError::NonContiguous {
            expected,
            got: view.b_index(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OfflineCheckError {
    #[error("subformula {subformula} at instant {instant}: monitor {interval}, oracle {expected}")]
    Mismatch {
        subformula: String,
        instant: usize,
        interval: RobustnessInterval,
        expected: f64,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
}

/// Runs the monitor over the whole trace and checks the final interval at
/// anchor 0 collapses onto the oracle's robustness. On a mismatch the error
/// names the first subformula (bottom-up) and instant that disagree.
pub fn clam_offline_check(
    trace: &Trace,
    f: &Formula,
    kernel: WindowKernel,
) -> Result<RobustnessInterval, OfflineCheckError> {
    let expected = robustness(trace, f, 0)?;
    let plan = Arc::new(
        Plan::compile(f, trace.step(), trace.variables(), &DomainBounds::new(), 0)
            .map_err(MonitorError::from)?,
    );
    let mut clam = ClamState::with_kernel(Arc::clone(&plan), kernel);
    let mut last = RobustnessInterval::point(f64::NAN);
    for b in 0..trace.len() {
        last = clam.step(&trace.view(b).expect("index within trace"))?;
    }
    if last.lower == expected && last.upper == expected {
        return Ok(last);
    }
    let b = trace.len() - 1;
    for (n, node) in plan.nodes.iter().enumerate() {
        let top = node.last_anchor.min(b.saturating_sub(node.horizon));
        for tau in 0..=top {
            let want = robustness(trace, &node.formula, tau)?;
            let got = RobustnessInterval::new(clam.engine.lo(n, tau), clam.engine.up(n, tau));
            if got.lower != want || got.upper != want {
                return Err(OfflineCheckError::Mismatch {
                    subformula: node.formula.to_string(),
                    instant: tau,
                    interval: got,
                    expected: want,
                });
            }
        }
    }
    Err(OfflineCheckError::Mismatch {
        subformula: f.to_string(),
        instant: 0,
        interval: last,
        expected,
    })
}
