//! Reference robust semantics over complete sampled traces.
//!
//! Deliberately naive: every window is re-scanned recursively. This module is
//! the ground truth the online monitors are checked against.

use thiserror::Error;

use crate::formula::{Formula, IntervalError};
use crate::trace::{Trace, TraceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("trace has {len} samples but evaluating at {anchor} needs {needed}")]
    InsufficientLength {
        len: usize,
        anchor: usize,
        needed: usize,
    },
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Robustness of `f` on `trace` at sample `k`. Empty infima are `+inf`, empty suprema `-inf`.
pub fn robustness(trace: &Trace, f: &Formula, k: usize) -> Result<f64, OracleError> {
    let delta = trace.step();
    let needed = k + f.horizon_samples(delta)? + 1;
    if trace.len() < needed {
        return Err(OracleError::InsufficientLength {
            len: trace.len(),
            anchor: k,
            needed,
        });
    }
    rob(trace, f, k, delta)
}

fn rob(trace: &Trace, f: &Formula, k: usize, delta: f64) -> Result<f64, OracleError> {
    Ok(match f {
        Formula::Atom(a) => {
            let sample = trace.sample(k)?;
            let lookup = |name: &str| {
                trace
                    .variable_index(name)
                    .map(|i| sample[i])
                    .unwrap_or(f64::NAN)
            };
            a.expr.eval(&lookup)
        }
        Formula::False => f64::NEG_INFINITY,
        Formula::Not(g) => -rob(trace, g, k, delta)?,
        Formula::And(a, b) => rob(trace, a, k, delta)?.min(rob(trace, b, k, delta)?),
        Formula::Or(a, b) => rob(trace, a, k, delta)?.max(rob(trace, b, k, delta)?),
        Formula::Always(i, g) => {
            let (l, u) = i.to_samples(delta)?;
            let mut acc = f64::INFINITY;
            for t in k + l..=k + u {
                acc = acc.min(rob(trace, g, t, delta)?);
            }
            acc
        }
        Formula::Eventually(i, g) => {
            let (l, u) = i.to_samples(delta)?;
            let mut acc = f64::NEG_INFINITY;
            for t in k + l..=k + u {
                acc = acc.max(rob(trace, g, t, delta)?);
            }
            acc
        }
        Formula::Until(i, a, b) => {
            let (l, u) = i.to_samples(delta)?;
            let mut acc = f64::NEG_INFINITY;
            for t in k + l..=k + u {
                let mut prefix = f64::INFINITY;
                for t2 in k..t {
                    prefix = prefix.min(rob(trace, a, t2, delta)?);
                }
                acc = acc.max(rob(trace, b, t, delta)?.min(prefix));
            }
            acc
        }
    })
}

/// Kleene three-valued satisfaction on the first `len` samples of `trace`.
///
/// `None` means the available samples do not decide the formula. An atom is
/// true when its expression is strictly positive.
pub fn three_valued(trace: &Trace, f: &Formula, len: usize, k: usize) -> Option<bool> {
    let delta = trace.step();
    let len = len.min(trace.len());
    kleene(trace, f, len, k, delta)
}

fn and3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn or3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    and3(a.map(|v| !v), b.map(|v| !v)).map(|v| !v)
}

fn kleene(trace: &Trace, f: &Formula, len: usize, k: usize, delta: f64) -> Option<bool> {
    let window = |i: &crate::formula::TimeInterval| i.to_samples(delta).ok();
    match f {
        Formula::Atom(a) => {
            if k >= len {
                return None;
            }
            let sample = trace.sample(k).ok()?;
            let lookup = |name: &str| {
                trace
                    .variable_index(name)
                    .map(|i| sample[i])
                    .unwrap_or(f64::NAN)
            };
            Some(a.expr.eval(&lookup) > 0.0)
        }
        Formula::False => Some(false),
        Formula::Not(g) => kleene(trace, g, len, k, delta).map(|v| !v),
        Formula::And(a, b) => and3(
            kleene(trace, a, len, k, delta),
            kleene(trace, b, len, k, delta),
        ),
        Formula::Or(a, b) => or3(
            kleene(trace, a, len, k, delta),
            kleene(trace, b, len, k, delta),
        ),
        Formula::Always(i, g) => {
            let (l, u) = window(i)?;
            (k + l..=k + u).fold(Some(true), |acc, t| {
                and3(acc, kleene(trace, g, len, t, delta))
            })
        }
        Formula::Eventually(i, g) => {
            let (l, u) = window(i)?;
            (k + l..=k + u).fold(Some(false), |acc, t| {
                or3(acc, kleene(trace, g, len, t, delta))
            })
        }
        Formula::Until(i, a, b) => {
            let (l, u) = window(i)?;
            let mut acc = Some(false);
            for t in k + l..=k + u {
                let prefix = (k..t).fold(Some(true), |p, t2| {
                    and3(p, kleene(trace, a, len, t2, delta))
                });
                acc = or3(acc, and3(kleene(trace, b, len, t, delta), prefix));
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    fn s1() -> Trace {
        Trace::from_columns(1.0, &[("x", vec![1.0, 2.0, -1.0, 0.0, 3.0, -2.0])]).unwrap()
    }

    #[test]
    fn always_is_window_minimum() {
        let f = parse_formula("alw_[0,2] (x > 0)", &["x"]).unwrap();
        assert_eq!(robustness(&s1(), &f, 0).unwrap(), -1.0);
    }

    #[test]
    fn until_expands_over_every_grid_point() {
        let f = parse_formula("(x > 0) until_[0,3] (-1 - x > 0)", &["x"]).unwrap();
        // candidates at t = 1..4 are -3, 0, -1, -4
        assert_eq!(robustness(&s1(), &f, 1).unwrap(), 0.0);
    }

    #[test]
    fn false_is_negative_infinity() {
        assert_eq!(
            robustness(&s1(), &Formula::False, 3).unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(
            robustness(&s1(), &Formula::truth(), 3).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn short_trace_is_an_error() {
        let f = parse_formula("alw_[0,2] (x > 0)", &["x"]).unwrap();
        assert_eq!(
            robustness(&s1(), &f, 4),
            Err(OracleError::InsufficientLength {
                len: 6,
                anchor: 4,
                needed: 7
            })
        );
    }

    #[test]
    fn kleene_agrees_with_sign() {
        let f = parse_formula("ev_[0,2] (x > 2)", &["x"]).unwrap();
        let t = s1();
        assert_eq!(three_valued(&t, &f, 6, 2), Some(true));
        assert_eq!(three_valued(&t, &f, 6, 0), Some(false));
        assert_eq!(three_valued(&t, &f, 3, 2), None);
    }
}
