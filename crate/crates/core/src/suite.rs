//! Random (formula, trace) corpus and the per-run cross-checks between
//! monitors.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::causation::{reconstruct_clam, CausationOutput, QcaumState};
use crate::classic::{ClamState, RobustnessInterval, Verdict};
use crate::engine::WindowKernel;
use crate::epoch::{BcaumState, CausationVerdict};
use crate::formula::{Atom, Expr, Formula, TimeInterval};
use crate::oracle::robustness;
use crate::plan::Plan;
use crate::reset::{ResetState, ResmStep};
use crate::trace::{atom_bounds, DomainBounds, Trace};

/// Longest generated trace, in samples.
pub const MAX_TRACE_LEN: usize = 64;
/// Largest interval endpoint, in samples.
pub const MAX_WINDOW: usize = 7;
pub const MAX_DEPTH: usize = 4;

#[derive(Debug, Clone)]
pub struct Case {
    pub id: usize,
    pub formula: Formula,
    pub trace: Trace,
    pub bounds: DomainBounds,
}

/// Deterministic corpus: case `i` depends only on `seed` and `i`.
pub fn gen_suite(seed: u64, count: usize) -> Vec<Case> {
    (0..count).map(|i| gen_case(seed, i)).collect()
}

pub fn gen_case(seed: u64, id: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    let delta = *[1.0, 0.5, 0.25].choose(&mut rng).expect("non-empty");
    let formula = if id % 10 == 0 {
        let i = gen_interval(&mut rng, delta);
        let a = gen_formula(&mut rng, MAX_DEPTH - 1, delta);
        let b = gen_formula(&mut rng, MAX_DEPTH - 1, delta);
        Formula::until(i, a, b)
    } else {
        gen_formula(&mut rng, MAX_DEPTH, delta)
    }
    .number_atoms();
    let horizon = formula
        .horizon_samples(delta)
        .expect("generated intervals lie on the grid");
    let len = rng.gen_range(horizon + 1..=MAX_TRACE_LEN.max(horizon + 1));
    let atoms: Vec<Atom> = formula.atoms().into_iter().cloned().collect();
    let trace = gen_trace(&mut rng, delta, len, &atoms);
    let mut bounds = DomainBounds::new()
        .with("x", -10.0, 10.0)
        .with("y", -10.0, 10.0);
    let straddles = atoms.iter().all(|a| {
        let (lo, hi) = atom_bounds(a, &bounds);
        lo < 0.0 && 0.0 < hi
    });
    if !straddles || rng.gen_bool(0.5) {
        bounds = DomainBounds::new();
    }
    Case {
        id,
        formula,
        trace,
        bounds,
    }
}

fn gen_interval(rng: &mut ChaCha8Rng, delta: f64) -> TimeInterval {
    let u = rng.gen_range(0..=MAX_WINDOW);
    let l = rng.gen_range(0..=u);
    TimeInterval::new(l as f64 * delta, u as f64 * delta).expect("ordered and finite")
}

fn coefficient(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-8i32..=8) as f64 * 0.25
}

fn nonzero_coefficient(rng: &mut ChaCha8Rng) -> f64 {
    let c = rng.gen_range(1i32..=8) as f64 * 0.25;
    if rng.gen_bool(0.5) {
        c
    } else {
        -c
    }
}

fn gen_atom(rng: &mut ChaCha8Rng) -> Formula {
    let pick = |rng: &mut ChaCha8Rng| Expr::var(if rng.gen_bool(0.5) { "x" } else { "y" });
    let expr = match rng.gen_range(0..4) {
        0 => Expr::sub(pick(rng), Expr::Const(coefficient(rng))),
        1 => Expr::sub(Expr::Const(coefficient(rng)), pick(rng)),
        // a non-zero x coefficient keeps the atom from being identically zero
        2 => Expr::add(
            Expr::mul(Expr::Const(nonzero_coefficient(rng)), Expr::var("x")),
            Expr::sub(
                Expr::mul(Expr::Const(coefficient(rng)), Expr::var("y")),
                Expr::Const(coefficient(rng)),
            ),
        ),
        _ => Expr::sub(
            Expr::Const(rng.gen_range(1..=8) as f64 * 0.25),
            Expr::abs(Expr::sub(pick(rng), Expr::Const(coefficient(rng)))),
        ),
    };
    Formula::atom(expr)
}

fn gen_formula(rng: &mut ChaCha8Rng, depth: usize, delta: f64) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return gen_atom(rng);
    }
    let d = depth - 1;
    match rng.gen_range(0..6) {
        0 => Formula::not(gen_formula(rng, d, delta)),
        1 => Formula::and(gen_formula(rng, d, delta), gen_formula(rng, d, delta)),
        2 => Formula::or(gen_formula(rng, d, delta), gen_formula(rng, d, delta)),
        3 => Formula::always(gen_interval(rng, delta), gen_formula(rng, d, delta)),
        4 => Formula::eventually(gen_interval(rng, delta), gen_formula(rng, d, delta)),
        _ => Formula::until(
            gen_interval(rng, delta),
            gen_formula(rng, d, delta),
            gen_formula(rng, d, delta),
        ),
    }
}

/// Piecewise-linear signals sampled on the grid, nudged until no atom
/// evaluates to exactly zero.
fn gen_trace(rng: &mut ChaCha8Rng, delta: f64, len: usize, atoms: &[Atom]) -> Trace {
    let mut columns = Vec::new();
    for _ in 0..2 {
        let mut col = Vec::with_capacity(len);
        let mut from = rng.gen_range(-4.0..4.0);
        while col.len() < len {
            let seg = rng.gen_range(3..=10);
            let to = rng.gen_range(-4.0..4.0);
            for k in 0..seg {
                col.push(from + (to - from) * k as f64 / seg as f64);
            }
            from = to;
        }
        col.truncate(len);
        columns.push(col);
    }
    for k in 0..len {
        loop {
            let (x, y) = (columns[0][k], columns[1][k]);
            let lookup = |name: &str| if name == "x" { x } else { y };
            if atoms.iter().all(|a| a.expr.eval(&lookup).abs() > 1e-9) {
                break;
            }
            columns[0][k] += rng.gen_range(0.01..0.05);
            columns[1][k] -= rng.gen_range(0.01..0.05);
        }
    }
    let y = columns.pop().expect("two columns");
    let x = columns.pop().expect("two columns");
    Trace::from_columns(delta, &[("x", x), ("y", y)]).expect("finite samples")
}

/// Everything the four monitors report for one sample.
#[derive(Debug, Clone, Copy)]
pub struct JointStep {
    pub interval: RobustnessInterval,
    pub verdict: Verdict,
    pub causation: CausationVerdict,
    pub quantitative: CausationOutput,
    pub reset: ResmStep,
}

/// Counts of property violations observed along one run. Every field is
/// zero on a conforming run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckCounts {
    pub steps: usize,
    /// Upper bound increased or lower bound decreased between two steps.
    pub monotonicity: usize,
    /// A conclusive verdict turned into another verdict.
    pub verdict_regression: usize,
    /// Classic verdict disagrees with the history of causation verdicts.
    pub classic_vs_causation: usize,
    /// Distance signs disagree with the causation verdict (non-zero distances only).
    pub distance_signs: usize,
    /// Running min/max of distances differs from the classic interval.
    pub reconstruction: usize,
    /// Epoch emptiness disagrees with the sign of the matching bound.
    pub epoch_emptiness: usize,
    /// First strictly negative upper (positive lower) bound without a causation verdict.
    pub first_conclusion: usize,
    /// Naive and deque kernels disagree.
    pub kernel: usize,
    /// Membership query disagrees with the fully collected epoch.
    pub membership: usize,
    /// Monotonicity broken inside a reset episode.
    pub reset_monotonicity: usize,
}

impl CheckCounts {
    pub fn failures(&self) -> usize {
        self.monotonicity
            + self.verdict_regression
            + self.classic_vs_causation
            + self.distance_signs
            + self.reconstruction
            + self.epoch_emptiness
            + self.first_conclusion
            + self.kernel
            + self.membership
            + self.reset_monotonicity
    }

    pub fn add(&mut self, other: &CheckCounts) {
        self.steps += other.steps;
        self.monotonicity += other.monotonicity;
        self.verdict_regression += other.verdict_regression;
        self.classic_vs_causation += other.classic_vs_causation;
        self.distance_signs += other.distance_signs;
        self.reconstruction += other.reconstruction;
        self.epoch_emptiness += other.epoch_emptiness;
        self.first_conclusion += other.first_conclusion;
        self.kernel += other.kernel;
        self.membership += other.membership;
        self.reset_monotonicity += other.reset_monotonicity;
    }
}

/// Which optional, more expensive checks a [`JointRun`] performs.
#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    /// Shadow every monitor with the naive kernel and compare.
    pub compare_kernels: bool,
    /// Collect full epochs each step (emptiness and membership checks).
    pub full_epochs: bool,
}

/// Runs all four monitors side by side and checks the refinement relations
/// between them on every step.
#[derive(Debug, Clone)]
pub struct JointRun {
    clam: ClamState,
    bcaum: BcaumState,
    qcaum: QcaumState,
    resm: ResetState,
    shadow: Option<(ClamState, QcaumState)>,
    options: CheckOptions,
    outputs: Vec<CausationOutput>,
    intervals: Vec<RobustnessInterval>,
    prev: Option<RobustnessInterval>,
    prev_verdict: Verdict,
    prev_reset: Option<ResmStep>,
    seen_vio: bool,
    seen_sat: bool,
    upper_was_negative: bool,
    lower_was_positive: bool,
    counts: CheckCounts,
}

impl JointRun {
    pub fn new(plan: Arc<Plan>, options: CheckOptions) -> Self {
        let shadow = options.compare_kernels.then(|| {
            (
                ClamState::with_kernel(Arc::clone(&plan), WindowKernel::Naive),
                QcaumState::with_kernel(Arc::clone(&plan), WindowKernel::Naive),
            )
        });
        JointRun {
            clam: ClamState::new(Arc::clone(&plan)),
            bcaum: BcaumState::new(Arc::clone(&plan)),
            qcaum: QcaumState::new(Arc::clone(&plan)),
            resm: ResetState::new(plan),
            shadow,
            options,
            outputs: Vec::new(),
            intervals: Vec::new(),
            prev: None,
            prev_verdict: Verdict::Unknown,
            prev_reset: None,
            seen_vio: false,
            seen_sat: false,
            upper_was_negative: false,
            lower_was_positive: false,
            counts: CheckCounts::default(),
        }
    }

    pub fn step(&mut self, sample: &[f64]) -> JointStep {
        let interval = self.clam.step_values(sample);
        let verdict = interval.verdict();
        let causation = self.bcaum.step_values(sample);
        let quantitative = self.qcaum.step_values(sample);
        let reset = self.resm.step_values(sample);
        let c = &mut self.counts;
        c.steps += 1;

        if let Some(p) = self.prev {
            if interval.upper > p.upper || interval.lower < p.lower {
                c.monotonicity += 1;
            }
        }
        if self.prev_verdict.is_conclusive() && verdict != self.prev_verdict {
            c.verdict_regression += 1;
        }

        self.seen_vio |= causation == CausationVerdict::Violation;
        self.seen_sat |= causation == CausationVerdict::Satisfaction;
        let expected = match (self.seen_vio, self.seen_sat) {
            (true, false) => Verdict::False,
            (false, true) => Verdict::True,
            (false, false) => Verdict::Unknown,
            (true, true) => {
                c.classic_vs_causation += 1;
                verdict
            }
        };
        if expected != verdict {
            c.classic_vs_causation += 1;
        }

        let (v, s) = (quantitative.vio_distance, quantitative.sat_distance);
        if v != 0.0 && s != 0.0 && quantitative.derived_verdict != causation {
            c.distance_signs += 1;
        }
        if quantitative.running_upper != interval.upper
            || quantitative.running_lower != interval.lower
            || self.qcaum.interval() != interval
        {
            c.reconstruction += 1;
        }

        if interval.upper < 0.0 && !self.upper_was_negative {
            self.upper_was_negative = true;
            if causation != CausationVerdict::Violation {
                c.first_conclusion += 1;
            }
        }
        if interval.lower > 0.0 && !self.lower_was_positive {
            self.lower_was_positive = true;
            if causation != CausationVerdict::Satisfaction {
                c.first_conclusion += 1;
            }
        }

        if self.options.full_epochs {
            let b = self.outputs.len();
            let vio = self.bcaum.violation_epoch();
            let sat = self.bcaum.satisfaction_epoch();
            if (!vio.is_empty()) != (interval.upper < 0.0)
                || (!sat.is_empty()) != (interval.lower > 0.0)
            {
                c.epoch_emptiness += 1;
            }
            let full = if vio.iter().any(|&(_, t)| t == b) {
                CausationVerdict::Violation
            } else if sat.iter().any(|&(_, t)| t == b) {
                CausationVerdict::Satisfaction
            } else {
                CausationVerdict::Irrelevant
            };
            if full != causation {
                c.membership += 1;
            }
        }

        if let Some((clam, qcaum)) = &mut self.shadow {
            let i = clam.step_values(sample);
            let q = qcaum.step_values(sample);
            if i != interval
                || q.vio_distance != quantitative.vio_distance
                || q.sat_distance != quantitative.sat_distance
            {
                c.kernel += 1;
            }
        }

        if let Some(p) = self.prev_reset {
            let same_episode = p.episode == reset.episode;
            if same_episode
                && (reset.interval.upper > p.interval.upper
                    || reset.interval.lower < p.interval.lower)
            {
                c.reset_monotonicity += 1;
            }
        }

        self.prev = Some(interval);
        self.prev_verdict = verdict;
        self.prev_reset = Some(reset);
        self.outputs.push(quantitative);
        self.intervals.push(interval);
        JointStep {
            interval,
            verdict,
            causation,
            quantitative,
            reset,
        }
    }

    /// Counts so far, with the stream-level reconstruction check applied.
    pub fn finish(mut self) -> CheckCounts {
        let rebuilt = reconstruct_clam(&self.outputs);
        self.counts.reconstruction += rebuilt
            .iter()
            .zip(&self.intervals)
            .filter(|(a, b)| a != b)
            .count();
        self.counts
    }

    pub fn resets(&self) -> &[usize] {
        self.resm.resets()
    }
}

/// Outcome of running every check on one corpus case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub id: usize,
    /// Final interval at anchor 0 after the whole trace.
    pub final_interval: RobustnessInterval,
    /// Oracle robustness at anchor 0.
    pub offline: f64,
    pub counts: CheckCounts,
}

impl CaseReport {
    pub fn offline_agrees(&self) -> bool {
        self.final_interval.lower == self.offline && self.final_interval.upper == self.offline
    }
}

pub fn check_case(case: &Case) -> CaseReport {
    let trace = &case.trace;
    let plan = Plan::compile(
        &case.formula,
        trace.step(),
        trace.variables(),
        &case.bounds,
        0,
    )
    .expect("generated formulas compile");
    let options = CheckOptions {
        compare_kernels: true,
        full_epochs: true,
    };
    let mut run = JointRun::new(Arc::new(plan), options);
    let mut last = RobustnessInterval::point(f64::NAN);
    for b in 0..trace.len() {
        last = run.step(trace.sample(b).expect("sample in range")).interval;
    }
    let offline = robustness(trace, &case.formula, 0).unwrap_or(f64::NAN);
    CaseReport {
        id: case.id,
        final_interval: last,
        offline,
        counts: run.finish(),
    }
}

/// How a corpus is traversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise sequential.
    Parallel,
}

pub fn check_corpus(cases: &[Case], exec: Exec) -> Vec<CaseReport> {
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            cases.par_iter().map(check_case).collect()
        }
        _ => cases.iter().map(check_case).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = gen_suite(1, 3);
        let b = gen_suite(1, 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.formula, y.formula);
            assert_eq!(x.trace.len(), y.trace.len());
            for k in 0..x.trace.len() {
                assert_eq!(x.trace.sample(k).unwrap(), y.trace.sample(k).unwrap());
            }
        }
    }

    #[test]
    fn generator_shape_constraints() {
        let cases = gen_suite(7, 200);
        for c in &cases {
            assert!(c.formula.depth() <= MAX_DEPTH);
            assert!(c.trace.len() <= MAX_TRACE_LEN);
            let h = c.formula.horizon_samples(c.trace.step()).unwrap();
            assert!(c.trace.len() > h);
        }
        for chunk in cases.chunks(10) {
            assert!(chunk
                .iter()
                .any(|c| matches!(c.formula, Formula::Until(..))));
        }
    }

    #[test]
    fn small_corpus_is_clean() {
        for case in gen_suite(3, 40) {
            let r = check_case(&case);
            assert!(r.offline_agrees(), "case {}: {:?}", case.id, r);
            assert_eq!(r.counts.failures(), 0, "case {}: {:?}", case.id, r.counts);
        }
    }
}
