//! Test-only reference evaluators and generators. The evaluators recurse
//! directly over the formula for a single prefix and anchor, sharing no code
//! with the streaming engine.

#![allow(dead_code)]

use proptest::prelude::*;
use stl_causation::{Expr, Formula, TimeInterval, Trace};

const INF: f64 = f64::INFINITY;
const NEG_INF: f64 = f64::NEG_INFINITY;

fn atom_value(trace: &Trace, expr: &Expr, k: usize) -> f64 {
    let sample = trace.sample(k).expect("sample in prefix");
    let lookup = |name: &str| sample[trace.variable_index(name).expect("declared")];
    expr.eval(&lookup)
}

fn window(i: &TimeInterval, delta: f64, tau: usize) -> std::ops::RangeInclusive<usize> {
    let (l, u) = i.to_samples(delta).expect("grid interval");
    tau + l..=tau + u
}

/// Robustness interval of `f` at `tau` given samples `0..=b`; unseen atom
/// values range over the atom's a-priori bounds.
pub fn prefix_interval(trace: &Trace, f: &Formula, b: usize, tau: usize) -> (f64, f64) {
    let d = trace.step();
    match f {
        Formula::Atom(a) if tau <= b => {
            let v = atom_value(trace, &a.expr, tau);
            (v, v)
        }
        Formula::Atom(a) => (a.r_min, a.r_max),
        Formula::False => (NEG_INF, NEG_INF),
        Formula::Not(g) => {
            let (lo, up) = prefix_interval(trace, g, b, tau);
            (-up, -lo)
        }
        Formula::And(x, y) | Formula::Or(x, y) => {
            let p = prefix_interval(trace, x, b, tau);
            let q = prefix_interval(trace, y, b, tau);
            if matches!(f, Formula::And(..)) {
                (p.0.min(q.0), p.1.min(q.1))
            } else {
                (p.0.max(q.0), p.1.max(q.1))
            }
        }
        Formula::Always(i, g) => window(i, d, tau).fold((INF, INF), |acc, t| {
            let p = prefix_interval(trace, g, b, t);
            (acc.0.min(p.0), acc.1.min(p.1))
        }),
        Formula::Eventually(i, g) => window(i, d, tau).fold((NEG_INF, NEG_INF), |acc, t| {
            let p = prefix_interval(trace, g, b, t);
            (acc.0.max(p.0), acc.1.max(p.1))
        }),
        Formula::Until(i, x, y) => window(i, d, tau).fold((NEG_INF, NEG_INF), |acc, t| {
            let q = prefix_interval(trace, y, b, t);
            let p = (tau..t).fold((INF, INF), |p, t2| {
                let r = prefix_interval(trace, x, b, t2);
                (p.0.min(r.0), p.1.min(r.1))
            });
            (acc.0.max(q.0.min(p.0)), acc.1.max(q.1.min(p.1)))
        }),
    }
}

fn upper(trace: &Trace, f: &Formula, b: usize, tau: usize) -> f64 {
    prefix_interval(trace, f, b, tau).1
}

fn lower(trace: &Trace, f: &Formula, b: usize, tau: usize) -> f64 {
    prefix_interval(trace, f, b, tau).0
}

/// Violation causation distance of `f` at `tau` for the prefix ending at `b`.
pub fn vio_distance(trace: &Trace, f: &Formula, b: usize, tau: usize) -> f64 {
    let d = trace.step();
    match f {
        Formula::Atom(a) if tau == b => atom_value(trace, &a.expr, b),
        Formula::Atom(a) => a.r_max,
        Formula::False => NEG_INF,
        Formula::Not(g) => -sat_distance(trace, g, b, tau),
        Formula::And(x, y) => vio_distance(trace, x, b, tau).min(vio_distance(trace, y, b, tau)),
        Formula::Or(x, y) => vio_distance(trace, x, b, tau)
            .max(upper(trace, y, b, tau))
            .min(upper(trace, x, b, tau).max(vio_distance(trace, y, b, tau))),
        Formula::Always(i, g) => window(i, d, tau)
            .map(|t| vio_distance(trace, g, b, t))
            .fold(INF, f64::min),
        Formula::Eventually(i, g) => {
            let u = upper(trace, f, b, tau);
            window(i, d, tau)
                .map(|t| vio_distance(trace, g, b, t).max(u))
                .fold(INF, f64::min)
        }
        Formula::Until(i, x, y) => {
            let u = upper(trace, f, b, tau);
            window(i, d, tau)
                .map(|t| {
                    let first = (tau..t)
                        .map(|t2| vio_distance(trace, x, b, t2))
                        .fold(INF, f64::min);
                    first.min(vio_distance(trace, y, b, t)).max(u)
                })
                .fold(INF, f64::min)
        }
    }
}

/// Satisfaction causation distance of `f` at `tau` for the prefix ending at `b`.
pub fn sat_distance(trace: &Trace, f: &Formula, b: usize, tau: usize) -> f64 {
    let d = trace.step();
    match f {
        Formula::Atom(a) if tau == b => atom_value(trace, &a.expr, b),
        Formula::Atom(a) => a.r_min,
        Formula::False => NEG_INF,
        Formula::Not(g) => -vio_distance(trace, g, b, tau),
        Formula::And(x, y) => sat_distance(trace, x, b, tau)
            .min(lower(trace, y, b, tau))
            .max(lower(trace, x, b, tau).min(sat_distance(trace, y, b, tau))),
        Formula::Or(x, y) => sat_distance(trace, x, b, tau).max(sat_distance(trace, y, b, tau)),
        Formula::Always(i, g) => {
            let l = lower(trace, f, b, tau);
            window(i, d, tau)
                .map(|t| sat_distance(trace, g, b, t).min(l))
                .fold(NEG_INF, f64::max)
        }
        Formula::Eventually(i, g) => window(i, d, tau)
            .map(|t| sat_distance(trace, g, b, t))
            .fold(NEG_INF, f64::max),
        Formula::Until(i, x, y) => window(i, d, tau)
            .map(|t| {
                let sup_sat = (tau..t)
                    .map(|t2| sat_distance(trace, x, b, t2))
                    .fold(NEG_INF, f64::max);
                let inf_lo = (tau..t)
                    .map(|t2| lower(trace, x, b, t2))
                    .fold(INF, f64::min);
                let keep = sup_sat.min(inf_lo).min(lower(trace, y, b, t));
                let finish = inf_lo.min(sat_distance(trace, y, b, t));
                keep.max(finish)
            })
            .fold(NEG_INF, f64::max),
    }
}

fn linear_atom() -> impl Strategy<Value = Formula> {
    let coef = (-8i32..=8).prop_map(|c| c as f64 * 0.25);
    let var = prop_oneof![Just("x"), Just("y")];
    prop_oneof![
        (var.clone(), coef.clone())
            .prop_map(|(v, c)| Formula::atom(Expr::sub(Expr::var(v), Expr::Const(c)))),
        (coef.clone(), var.clone())
            .prop_map(|(c, v)| Formula::atom(Expr::sub(Expr::Const(c), Expr::var(v)))),
        (1i32..=8, var, coef).prop_map(|(r, v, c)| Formula::atom(Expr::sub(
            Expr::Const(r as f64 * 0.25),
            Expr::abs(Expr::sub(Expr::var(v), Expr::Const(c)))
        ))),
    ]
}

fn interval(max: usize) -> impl Strategy<Value = TimeInterval> {
    (0..=max)
        .prop_flat_map(|u| (0..=u, Just(u)))
        .prop_map(|(l, u)| TimeInterval::new(l as f64, u as f64).expect("ordered"))
}

/// Formulas over `x` and `y` with unit-step windows of at most `window` samples.
pub fn formula(depth: u32, window: usize) -> impl Strategy<Value = Formula> {
    linear_atom().prop_recursive(depth, 24, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (interval(window), inner.clone()).prop_map(|(i, f)| Formula::always(i, f)),
            (interval(window), inner.clone()).prop_map(|(i, f)| Formula::eventually(i, f)),
            (interval(window), inner.clone(), inner).prop_map(|(i, a, b)| Formula::until(i, a, b)),
        ]
    })
}

/// Unit-step trace over `x` and `y`. Values are multiples of 1/8 offset by
/// 1/16 so no generated atom (thresholds on the quarter grid) is exactly zero.
pub fn trace(min_len: usize, max_len: usize) -> impl Strategy<Value = Trace> {
    (min_len..=max_len).prop_flat_map(|n| {
        let col = proptest::collection::vec(-32i32..32, n);
        (col.clone(), col).prop_map(|(x, y)| {
            let f = |c: Vec<i32>| c.into_iter().map(|v| v as f64 / 8.0 + 1.0 / 16.0).collect();
            Trace::from_columns(1.0, &[("x", f(x)), ("y", f(y))]).expect("finite")
        })
    })
}
