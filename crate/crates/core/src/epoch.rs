//! Violation and satisfaction epochs and the Boolean causation monitor.
//!
//! Disjunction and eventually have no clauses of their own in the epoch
//! definition; rewriting them through negation collapses to the same
//! recursion as conjunction and always (collect every operand or window
//! instant whose own guard holds), so all four share one code path.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::classic::{check_contiguous, ClamState, MonitorError, RobustnessInterval};
use crate::engine::{Engine, WindowKernel};
use crate::formula::Formula;
use crate::plan::{NodeKind, Plan};
use crate::trace::{DomainBounds, PrefixView};

/// Set of `(atom id, sample instant)` pairs.
pub type Epoch = BTreeSet<(usize, usize)>;

/// Per-step output of the Boolean causation monitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CausationVerdict {
    /// The current sample is part of the violation epoch.
    Violation,
    /// The current sample is part of the satisfaction epoch.
    Satisfaction,
    Irrelevant,
}

impl CausationVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            CausationVerdict::Violation => "vio",
            CausationVerdict::Satisfaction => "sat",
            CausationVerdict::Irrelevant => "irrelevant",
        }
    }
}

impl fmt::Display for CausationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn guard(e: &Engine, n: usize, tau: usize, vio: bool) -> bool {
    if vio {
        e.up(n, tau) < 0.0
    } else {
        e.lo(n, tau) > 0.0
    }
}

/// Until candidate at `t`: `min(B(right, t), inf_{t' in [tau, t)} B(left, t'))`
/// with `B` the upper bound for violations and the lower bound for satisfactions.
fn until_candidates(
    e: &Engine,
    tau: usize,
    l: usize,
    u: usize,
    left: usize,
    right: usize,
    vio: bool,
) -> impl Iterator<Item = usize> + '_ {
    let bound = move |n: usize, t: usize| if vio { e.up(n, t) } else { e.lo(n, t) };
    let mut run = f64::INFINITY;
    (tau..=tau + u).filter_map(move |t| {
        let cand = bound(right, t).min(run);
        run = run.min(bound(left, t));
        let holds = if vio { cand < 0.0 } else { cand > 0.0 };
        (t >= tau + l && holds).then_some(t)
    })
}

pub(crate) fn collect(e: &Engine, n: usize, tau: usize, vio: bool, out: &mut Epoch) {
    if !guard(e, n, tau, vio) {
        return;
    }
    match e.plan().nodes[n].kind {
        NodeKind::Atom { id, .. } => {
            out.insert((id, tau));
        }
        NodeKind::False => {}
        NodeKind::Not(c) => collect(e, c, tau, !vio, out),
        NodeKind::And(a, c) | NodeKind::Or(a, c) => {
            collect(e, a, tau, vio, out);
            collect(e, c, tau, vio, out);
        }
        NodeKind::Always { l, u, child } | NodeKind::Eventually { l, u, child } => {
            for t in tau + l..=tau + u {
                collect(e, child, t, vio, out);
            }
        }
        NodeKind::Until { l, u, left, right } => {
            for t in until_candidates(e, tau, l, u, left, right, vio).collect::<Vec<_>>() {
                collect(e, right, t, vio, out);
                for t2 in tau..t {
                    collect(e, left, t2, vio, out);
                }
            }
        }
    }
}

/// Whether some `(atom, b)` belongs to the epoch of node `n` at `tau`. Only
/// anchors whose dependency window `[t, t + horizon]` contains `b` are visited.
pub(crate) fn contains_instant(e: &Engine, n: usize, tau: usize, vio: bool, b: usize) -> bool {
    let node = &e.plan().nodes[n];
    if tau > b || tau + node.horizon < b || !guard(e, n, tau, vio) {
        return false;
    }
    let reach = |c: usize, from: usize, to: usize| {
        let h = e.plan().nodes[c].horizon;
        from.max(b.saturating_sub(h))..=to.min(b)
    };
    match node.kind {
        NodeKind::Atom { .. } => tau == b,
        NodeKind::False => false,
        NodeKind::Not(c) => contains_instant(e, c, tau, !vio, b),
        NodeKind::And(a, c) | NodeKind::Or(a, c) => {
            contains_instant(e, a, tau, vio, b) || contains_instant(e, c, tau, vio, b)
        }
        NodeKind::Always { l, u, child } | NodeKind::Eventually { l, u, child } => {
            reach(child, tau + l, tau + u).any(|t| contains_instant(e, child, t, vio, b))
        }
        NodeKind::Until { l, u, left, right } => until_candidates(e, tau, l, u, left, right, vio)
            .any(|t| {
                contains_instant(e, right, t, vio, b)
                    || (t > tau
                        && reach(left, tau, t - 1).any(|t2| contains_instant(e, left, t2, vio, b)))
            }),
    }
}

/// Streaming Boolean causation monitor at anchor 0.
#[derive(Debug, Clone)]
pub struct BcaumState {
    clam: ClamState,
}

impl BcaumState {
    pub fn new(plan: Arc<Plan>) -> Self {
        Self::with_kernel(plan, WindowKernel::default())
    }

    pub fn with_kernel(plan: Arc<Plan>, kernel: WindowKernel) -> Self {
        BcaumState {
            clam: ClamState::with_kernel(plan, kernel),
        }
    }

    pub fn next_index(&self) -> usize {
        self.clam.next_index()
    }

    pub fn step(&mut self, view: &PrefixView<'_>) -> Result<CausationVerdict, MonitorError> {
        check_contiguous(self.clam.next_index(), view)?;
        Ok(self.step_values(view.current()))
    }

    pub fn step_values(&mut self, sample: &[f64]) -> CausationVerdict {
        self.clam.step_values(sample);
        let e = self.clam.engine();
        let (root, b) = (e.plan().root(), e.b());
        if contains_instant(e, root, 0, true, b) {
            CausationVerdict::Violation
        } else if contains_instant(e, root, 0, false, b) {
            CausationVerdict::Satisfaction
        } else {
            CausationVerdict::Irrelevant
        }
    }

    /// Interval of the underlying classic monitor after the last step.
    pub fn interval(&self) -> RobustnessInterval {
        self.clam.interval_at(0)
    }

    pub fn violation_epoch(&self) -> Epoch {
        self.epoch(true)
    }

    pub fn satisfaction_epoch(&self) -> Epoch {
        self.epoch(false)
    }

    fn epoch(&self, vio: bool) -> Epoch {
        let e = self.clam.engine();
        let mut out = Epoch::new();
        if e.next_index() > 0 {
            collect(e, e.plan().root(), 0, vio, &mut out);
        }
        out
    }
}

fn epoch_at(
    view: &PrefixView<'_>,
    f: &Formula,
    k: usize,
    vio: bool,
) -> Result<Epoch, MonitorError> {
    let trace = view.trace();
    let plan = Plan::compile(f, trace.step(), trace.variables(), &DomainBounds::new(), k)?;
    let mut clam = ClamState::new(Arc::new(plan));
    for b in 0..=view.b_index() {
        clam.step(&trace.view(b).expect("prefix of a valid view"))
            .expect("steps are contiguous");
    }
    let e = clam.engine();
    let mut out = Epoch::new();
    collect(e, e.plan().root(), k, vio, &mut out);
    Ok(out)
}

/// Violation epoch of `f` at anchor `k` on the prefix `view`, without domain bounds.
pub fn violation_epoch(
    view: &PrefixView<'_>,
    f: &Formula,
    k: usize,
) -> Result<Epoch, MonitorError> {
    epoch_at(view, f, k, true)
}

/// Satisfaction epoch of `f` at anchor `k` on the prefix `view`, without domain bounds.
pub fn satisfaction_epoch(
    view: &PrefixView<'_>,
    f: &Formula,
    k: usize,
) -> Result<Epoch, MonitorError> {
    epoch_at(view, f, k, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::trace::Trace;

    fn trace(xs: &[f64]) -> Trace {
        Trace::from_columns(1.0, &[("x", xs.to_vec())]).unwrap()
    }

    #[test]
    fn always_epoch_picks_negative_instant() {
        let f = parse_formula("alw_[0,2] (x > 0)", &["x"]).unwrap();
        let t = trace(&[1.0, 2.0, -1.0]);
        let e = violation_epoch(&t.view(2).unwrap(), &f, 0).unwrap();
        assert_eq!(e, Epoch::from([(0, 2)]));
    }

    #[test]
    fn eventually_satisfaction_epoch() {
        let f = parse_formula("ev_[0,2] (x > 0)", &["x"]).unwrap();
        let t = trace(&[-1.0, 3.0]);
        let e = satisfaction_epoch(&t.view(1).unwrap(), &f, 0).unwrap();
        assert_eq!(e, Epoch::from([(0, 1)]));
    }

    #[test]
    fn negation_swaps_polarity() {
        let f = parse_formula("not (x > 0)", &["x"]).unwrap();
        let t = trace(&[-2.0]);
        let e = satisfaction_epoch(&t.view(0).unwrap(), &f, 0).unwrap();
        assert_eq!(e, Epoch::from([(0, 0)]));
        assert!(violation_epoch(&t.view(0).unwrap(), &f, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn guard_failure_gives_empty_epoch() {
        let f = parse_formula("alw_[0,2] (x > 0)", &["x"]).unwrap();
        let t = trace(&[1.0, 2.0]);
        assert!(satisfaction_epoch(&t.view(1).unwrap(), &f, 0)
            .unwrap()
            .is_empty());
        assert!(violation_epoch(&t.view(1).unwrap(), &f, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn bcaum_on_short_run() {
        let f = parse_formula("alw_[0,2] (x > 0)", &["x"]).unwrap();
        let t = trace(&[1.0, 2.0, -1.0]);
        let plan = Plan::compile(&f, 1.0, t.variables(), &DomainBounds::new(), 0).unwrap();
        let mut m = BcaumState::new(Arc::new(plan));
        let got: Vec<_> = (0..3)
            .map(|b| m.step(&t.view(b).unwrap()).unwrap())
            .collect();
        use CausationVerdict::*;
        assert_eq!(got, vec![Irrelevant, Irrelevant, Violation]);
    }

    #[test]
    fn until_epoch_collects_prefix_of_left_operand() {
        // (x > 0) until_[1,2] (y > 0): y stays negative so every candidate fails.
        let f = parse_formula("(x > 0) until_[1,2] (y > 0)", &["x", "y"]).unwrap();
        let t = Trace::from_columns(
            1.0,
            &[("x", vec![1.0, -1.0, 2.0]), ("y", vec![-1.0, -2.0, -3.0])],
        )
        .unwrap();
        let e = violation_epoch(&t.view(2).unwrap(), &f, 0).unwrap();
        // t = 1: right(1) and left on [0,1) is fine, candidate min(-2, 1) < 0
        // t = 2: candidate min(-3, min(1, -1)) < 0
        assert_eq!(e, Epoch::from([(1, 1), (1, 2), (0, 1)]));
    }
}
