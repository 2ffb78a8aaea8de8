//! Shared dynamic-programming engine behind every online monitor.
//!
//! Each plan node owns one table per quantity (robustness interval lower and
//! upper bound, violation and satisfaction causation distance), indexed by
//! anchor instant. At step `b` a node with horizon `h` only recomputes the
//! anchors in `[b - h - 1, b]`: older anchors are final, and anchors after `b`
//! still hold the default value the table was initialised with.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::plan::{NodeKind, Plan};

const INF: f64 = f64::INFINITY;
const NEG_INF: f64 = f64::NEG_INFINITY;

/// How window aggregates (inf/sup over `tau + I`) are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKernel {
    /// Re-scan the whole window at every step.
    Naive,
    /// Monotone deques over finalized entries plus a scan of the live region.
    #[default]
    Deque,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Q {
    Lo = 0,
    Up = 1,
    Vio = 2,
    Sat = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Agg {
    Min,
    Max,
}

impl Agg {
    fn identity(self) -> f64 {
        match self {
            Agg::Min => INF,
            Agg::Max => NEG_INF,
        }
    }

    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Agg::Min => a.min(b),
            Agg::Max => a.max(b),
        }
    }
}

/// Sliding-window minimum or maximum over a stream of `(index, value)` pairs
/// pushed in increasing index order.
#[derive(Debug, Clone)]
pub struct MonoDeque {
    agg: Agg,
    items: VecDeque<(usize, f64)>,
}

impl MonoDeque {
    pub fn min() -> Self {
        MonoDeque {
            agg: Agg::Min,
            items: VecDeque::new(),
        }
    }

    pub fn max() -> Self {
        MonoDeque {
            agg: Agg::Max,
            items: VecDeque::new(),
        }
    }

    pub fn push(&mut self, index: usize, value: f64) {
        while let Some(&(_, last)) = self.items.back() {
            let dominated = match self.agg {
                Agg::Min => last >= value,
                Agg::Max => last <= value,
            };
            if !dominated {
                break;
            }
            self.items.pop_back();
        }
        self.items.push_back((index, value));
    }

    /// Aggregate over every pushed entry with index `>= from`.
    pub fn query_from(&self, from: usize) -> Option<f64> {
        let i = self.items.partition_point(|&(k, _)| k < from);
        self.items.get(i).map(|&(_, v)| v)
    }

    /// Drops entries with index `< below`.
    pub fn evict_below(&mut self, below: usize) {
        while matches!(self.items.front(), Some(&(k, _)) if k < below) {
            self.items.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

type Columns = [Vec<f64>; 4];

#[derive(Debug, Clone)]
pub(crate) struct Engine {
    plan: Arc<Plan>,
    kernel: WindowKernel,
    distances: bool,
    tables: Vec<Columns>,
    deques: Vec<Vec<(Q, MonoDeque)>>,
    parent: Vec<Option<usize>>,
    next: usize,
}

impl Engine {
    pub(crate) fn new(plan: Arc<Plan>, kernel: WindowKernel, distances: bool) -> Self {
        let n = plan.nodes.len();
        let defaults = node_defaults(&plan);
        let mut tables = Vec::with_capacity(n);
        let mut parent = vec![None; n];
        let mut deques: Vec<Vec<(Q, MonoDeque)>> = vec![Vec::new(); n];
        for (i, node) in plan.nodes.iter().enumerate() {
            let len = node.last_anchor + 1;
            let d = defaults[i];
            let col = |q: Q, wanted: bool| {
                if wanted {
                    vec![d[q as usize]; len]
                } else {
                    Vec::new()
                }
            };
            tables.push([
                col(Q::Lo, true),
                col(Q::Up, true),
                col(Q::Vio, distances),
                col(Q::Sat, distances),
            ]);
            let mut want = |c: usize, q: Q, agg: Agg| {
                parent[c] = Some(i);
                if kernel == WindowKernel::Deque && (distances || matches!(q, Q::Lo | Q::Up)) {
                    let dq = match agg {
                        Agg::Min => MonoDeque::min(),
                        Agg::Max => MonoDeque::max(),
                    };
                    deques[c].push((q, dq));
                }
            };
            match node.kind {
                NodeKind::Atom { .. } | NodeKind::False => {}
                NodeKind::Not(c) => parent[c] = Some(i),
                NodeKind::And(a, b) | NodeKind::Or(a, b) => {
                    parent[a] = Some(i);
                    parent[b] = Some(i);
                }
                NodeKind::Always { child, .. } => {
                    want(child, Q::Lo, Agg::Min);
                    want(child, Q::Up, Agg::Min);
                    want(child, Q::Vio, Agg::Min);
                    want(child, Q::Sat, Agg::Max);
                }
                NodeKind::Eventually { child, .. } => {
                    want(child, Q::Lo, Agg::Max);
                    want(child, Q::Up, Agg::Max);
                    want(child, Q::Vio, Agg::Min);
                    want(child, Q::Sat, Agg::Max);
                }
                NodeKind::Until { left, right, .. } => {
                    want(left, Q::Vio, Agg::Min);
                    want(right, Q::Vio, Agg::Min);
                }
            }
        }
        Engine {
            plan,
            kernel,
            distances,
            tables,
            deques,
            parent,
            next: 0,
        }
    }

    pub(crate) fn plan(&self) -> &Arc<Plan> {
        &self.plan
    }

    pub(crate) fn kernel(&self) -> WindowKernel {
        self.kernel
    }

    /// Index of the sample the next call to [`Engine::step`] consumes.
    pub(crate) fn next_index(&self) -> usize {
        self.next
    }

    /// Last consumed sample index. Only meaningful after the first step.
    pub(crate) fn b(&self) -> usize {
        self.next.saturating_sub(1)
    }

    pub(crate) fn get(&self, node: usize, q: Q, anchor: usize) -> f64 {
        self.tables[node][q as usize][anchor]
    }

    pub(crate) fn lo(&self, node: usize, anchor: usize) -> f64 {
        self.get(node, Q::Lo, anchor)
    }

    pub(crate) fn up(&self, node: usize, anchor: usize) -> f64 {
        self.get(node, Q::Up, anchor)
    }

    /// Consumes the sample at index `next_index()`.
    pub(crate) fn step(&mut self, sample: &[f64]) {
        let b = self.next;
        for n in 0..self.plan.nodes.len() {
            self.compute_node(n, b, sample);
            if self.kernel == WindowKernel::Deque {
                self.push_finalized(n, b);
            }
        }
        self.next += 1;
    }

    fn compute_node(&mut self, n: usize, b: usize, sample: &[f64]) {
        let plan = Arc::clone(&self.plan);
        let node = &plan.nodes[n];
        let last = node.last_anchor;
        let mut own = std::mem::take(&mut self.tables[n]);
        match &node.kind {
            NodeKind::Atom {
                expr, r_min, r_max, ..
            } => {
                if b <= last {
                    let f = expr.eval(sample);
                    own[Q::Lo as usize][b] = f;
                    own[Q::Up as usize][b] = f;
                    if self.distances {
                        own[Q::Vio as usize][b] = f;
                        own[Q::Sat as usize][b] = f;
                    }
                }
                if self.distances && b >= 1 && b - 1 <= last {
                    own[Q::Vio as usize][b - 1] = *r_max;
                    own[Q::Sat as usize][b - 1] = *r_min;
                }
            }
            NodeKind::False => {}
            kind => {
                let start = b.saturating_sub(node.horizon + 1);
                let end = b.min(last);
                for tau in start..=end {
                    let (lo, up) = self.interval_at(kind, tau, b);
                    own[Q::Lo as usize][tau] = lo;
                    own[Q::Up as usize][tau] = up;
                    if self.distances {
                        let (vio, sat) = self.distances_at(kind, tau, b, lo, up);
                        own[Q::Vio as usize][tau] = vio;
                        own[Q::Sat as usize][tau] = sat;
                    }
                }
            }
        }
        self.tables[n] = own;
    }

    fn push_finalized(&mut self, n: usize, b: usize) {
        let node = &self.plan.nodes[n];
        let Some(frontier) = b.checked_sub(node.horizon + 1) else {
            return;
        };
        if frontier > node.last_anchor || self.deques[n].is_empty() {
            return;
        }
        let floor = self.parent[n]
            .map(|p| b.saturating_sub(self.plan.nodes[p].horizon + 1))
            .unwrap_or(0);
        let tables = &self.tables[n];
        for (q, dq) in &mut self.deques[n] {
            dq.push(frontier, tables[*q as usize][frontier]);
            dq.evict_below(floor);
        }
    }

    /// Aggregate of column `q` of node `c` over anchors `[x, y]` at step `b`.
    fn window(&self, c: usize, q: Q, agg: Agg, x: usize, y: usize, b: usize) -> f64 {
        if x > y {
            return agg.identity();
        }
        let col = &self.tables[c][q as usize];
        let scan = |from: usize, to: usize| {
            col[from..=to]
                .iter()
                .fold(agg.identity(), |acc, &v| agg.pick(acc, v))
        };
        if self.kernel == WindowKernel::Naive {
            return scan(x, y);
        }
        let horizon = self.plan.nodes[c].horizon;
        let mut acc = agg.identity();
        // Finalized entries: anchors <= b - horizon - 1.
        let live_from = match b.checked_sub(horizon + 1) {
            Some(frontier) if frontier >= x => {
                let to = y.min(frontier);
                let deque = self.deques[c]
                    .iter()
                    .find(|(dq_q, dq)| *dq_q == q && dq.agg == agg)
                    .map(|(_, dq)| dq);
                let part = match deque {
                    Some(dq) if to == frontier => dq.query_from(x).unwrap_or(agg.identity()),
                    _ => scan(x, to),
                };
                acc = agg.pick(acc, part);
                frontier + 1
            }
            _ => x,
        };
        let live_to = y.min(b);
        if live_from <= live_to {
            acc = agg.pick(acc, scan(live_from, live_to));
        }
        if y > b {
            // Every anchor after b still holds the node's default value.
            acc = agg.pick(acc, col[y]);
        }
        acc
    }

    fn interval_at(&self, kind: &NodeKind, tau: usize, b: usize) -> (f64, f64) {
        let t = &self.tables;
        match *kind {
            NodeKind::Atom { .. } | NodeKind::False => unreachable!("handled by the caller"),
            NodeKind::Not(c) => (-t[c][1][tau], -t[c][0][tau]),
            NodeKind::And(a, c) => (
                t[a][0][tau].min(t[c][0][tau]),
                t[a][1][tau].min(t[c][1][tau]),
            ),
            NodeKind::Or(a, c) => (
                t[a][0][tau].max(t[c][0][tau]),
                t[a][1][tau].max(t[c][1][tau]),
            ),
            NodeKind::Always { l, u, child } => (
                self.window(child, Q::Lo, Agg::Min, tau + l, tau + u, b),
                self.window(child, Q::Up, Agg::Min, tau + l, tau + u, b),
            ),
            NodeKind::Eventually { l, u, child } => (
                self.window(child, Q::Lo, Agg::Max, tau + l, tau + u, b),
                self.window(child, Q::Up, Agg::Max, tau + l, tau + u, b),
            ),
            NodeKind::Until { l, u, left, right } => until_interval(
                tau,
                l,
                u,
                |k| (t[left][0][k], t[left][1][k]),
                |k| (t[right][0][k], t[right][1][k]),
            ),
        }
    }

    fn distances_at(&self, kind: &NodeKind, tau: usize, b: usize, lo: f64, up: f64) -> (f64, f64) {
        let t = &self.tables;
        let (lo_, up_, vio, sat) = (0, 1, 2, 3);
        match *kind {
            NodeKind::Atom { .. } | NodeKind::False => unreachable!("handled by the caller"),
            NodeKind::Not(c) => (-t[c][sat][tau], -t[c][vio][tau]),
            NodeKind::And(a, c) => (
                t[a][vio][tau].min(t[c][vio][tau]),
                t[a][sat][tau]
                    .min(t[c][lo_][tau])
                    .max(t[a][lo_][tau].min(t[c][sat][tau])),
            ),
            NodeKind::Or(a, c) => (
                t[a][vio][tau]
                    .max(t[c][up_][tau])
                    .min(t[a][up_][tau].max(t[c][vio][tau])),
                t[a][sat][tau].max(t[c][sat][tau]),
            ),
            NodeKind::Always { l, u, child } => (
                self.window(child, Q::Vio, Agg::Min, tau + l, tau + u, b),
                self.window(child, Q::Sat, Agg::Max, tau + l, tau + u, b)
                    .min(lo),
            ),
            NodeKind::Eventually { l, u, child } => (
                self.window(child, Q::Vio, Agg::Min, tau + l, tau + u, b)
                    .max(up),
                self.window(child, Q::Sat, Agg::Max, tau + l, tau + u, b),
            ),
            NodeKind::Until { l, u, left, right } => {
                let first = if u == 0 {
                    INF
                } else {
                    self.window(left, Q::Vio, Agg::Min, tau, tau + u - 1, b)
                };
                let second = self.window(right, Q::Vio, Agg::Min, tau + l, tau + u, b);
                let v = first.min(second).max(up);
                let s = until_sat(
                    tau,
                    l,
                    u,
                    |k| (t[left][sat][k], t[left][lo_][k]),
                    |k| (t[right][sat][k], t[right][lo_][k]),
                );
                (v, s)
            }
        }
    }
}

/// `sup_{t in tau+[l,u]} min(I2(t), inf_{t' in [tau,t)} I1(t'))`, componentwise.
fn until_interval(
    tau: usize,
    l: usize,
    u: usize,
    left: impl Fn(usize) -> (f64, f64),
    right: impl Fn(usize) -> (f64, f64),
) -> (f64, f64) {
    let (mut run_lo, mut run_up) = (INF, INF);
    let (mut best_lo, mut best_up) = (NEG_INF, NEG_INF);
    for t in tau..=tau + u {
        if t >= tau + l {
            let (r_lo, r_up) = right(t);
            best_lo = best_lo.max(r_lo.min(run_lo));
            best_up = best_up.max(r_up.min(run_up));
        }
        let (a_lo, a_up) = left(t);
        run_lo = run_lo.min(a_lo);
        run_up = run_up.min(a_up);
    }
    (best_lo, best_up)
}

/// Satisfaction causation distance of until. Each closure returns
/// `(sat distance, lower bound)` of the operand at an anchor.
fn until_sat(
    tau: usize,
    l: usize,
    u: usize,
    left: impl Fn(usize) -> (f64, f64),
    right: impl Fn(usize) -> (f64, f64),
) -> f64 {
    let mut sup_sat1 = NEG_INF;
    let mut inf_lo1 = INF;
    let mut best = NEG_INF;
    for t in tau..=tau + u {
        if t >= tau + l {
            let (sat2, lo2) = right(t);
            let keep_going = sup_sat1.min(inf_lo1).min(lo2);
            let finish_here = inf_lo1.min(sat2);
            best = best.max(keep_going.max(finish_here));
        }
        let (sat1, lo1) = left(t);
        sup_sat1 = sup_sat1.max(sat1);
        inf_lo1 = inf_lo1.min(lo1);
    }
    best
}

/// Table initial values: what each quantity equals at an anchor none of whose
/// dependencies has been observed yet.
fn node_defaults(plan: &Plan) -> Vec<[f64; 4]> {
    let mut out: Vec<[f64; 4]> = Vec::with_capacity(plan.nodes.len());
    for node in &plan.nodes {
        let d = match node.kind {
            NodeKind::Atom { r_min, r_max, .. } => [r_min, r_max, r_max, r_min],
            NodeKind::False => [NEG_INF; 4],
            NodeKind::Not(c) => {
                let [lo, up, vio, sat] = out[c];
                [-up, -lo, -sat, -vio]
            }
            NodeKind::And(a, c) => {
                let (x, y) = (out[a], out[c]);
                [
                    x[0].min(y[0]),
                    x[1].min(y[1]),
                    x[2].min(y[2]),
                    x[3].min(y[0]).max(x[0].min(y[3])),
                ]
            }
            NodeKind::Or(a, c) => {
                let (x, y) = (out[a], out[c]);
                [
                    x[0].max(y[0]),
                    x[1].max(y[1]),
                    x[2].max(y[1]).min(x[1].max(y[2])),
                    x[3].max(y[3]),
                ]
            }
            NodeKind::Always { child, .. } => {
                let [lo, up, vio, sat] = out[child];
                [lo, up, vio, sat.min(lo)]
            }
            NodeKind::Eventually { child, .. } => {
                let [lo, up, vio, sat] = out[child];
                [lo, up, vio.max(up), sat]
            }
            NodeKind::Until { l, u, left, right } => {
                let (x, y) = (out[left], out[right]);
                let (lo, up) = until_interval(0, l, u, |_| (x[0], x[1]), |_| (y[0], y[1]));
                let first = if u == 0 { INF } else { x[2] };
                let vio = first.min(y[2]).max(up);
                let sat = until_sat(0, l, u, |_| (x[3], x[0]), |_| (y[3], y[0]));
                [lo, up, vio, sat]
            }
        };
        out.push(d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mono_deque_suffix_queries() {
        let mut dq = MonoDeque::min();
        for (k, v) in [3.0, 1.0, 4.0, 1.5, 5.0, 2.0].into_iter().enumerate() {
            dq.push(k, v);
        }
        assert_eq!(dq.query_from(0), Some(1.0));
        assert_eq!(dq.query_from(2), Some(1.5));
        assert_eq!(dq.query_from(4), Some(2.0));
        assert_eq!(dq.query_from(6), None);
        dq.evict_below(4);
        assert_eq!(dq.query_from(0), Some(2.0));

        let mut mx = MonoDeque::max();
        for (k, v) in [3.0, 1.0, 4.0, 1.5].into_iter().enumerate() {
            mx.push(k, v);
        }
        assert_eq!(mx.query_from(0), Some(4.0));
        assert_eq!(mx.query_from(3), Some(1.5));
    }

    #[test]
    fn mono_deque_matches_brute_force() {
        let values: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let mut dq = MonoDeque::max();
        for (k, &v) in values.iter().enumerate() {
            dq.push(k, v);
            for from in k.saturating_sub(20)..=k {
                let brute = values[from..=k]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(dq.query_from(from), Some(brute));
            }
        }
    }

    #[test]
    fn until_empty_prefix_reduces_to_right_operand() {
        let (lo, up) = until_interval(0, 0, 0, |_| (9.0, 9.0), |_| (-1.0, 2.0));
        assert_eq!((lo, up), (-1.0, 2.0));
        let s = until_sat(0, 0, 0, |_| (9.0, 9.0), |_| (3.0, -1.0));
        assert_eq!(s, 3.0);
    }
}
