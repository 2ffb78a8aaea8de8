//! Benchmark specifications and synthetic traces shaped after them.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::formula::{parse_formula, Formula};
use crate::trace::Trace;

/// The four benchmark properties: air-fuel ratio control (AFC) and automatic
/// transmission (AT).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchSpec {
    /// The deviation from the reference ratio stays below 0.1.
    Afc1,
    /// Any large deviation is corrected within 1.5 time units.
    Afc2,
    /// After a deviation above 0.08 the ratio recovers within 2 time units.
    Afc3,
    /// Whenever speed exceeds 50, RPM drops below 3000 within [1, 3].
    At1,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown specification {0:?} (expected AFC1, AFC2, AFC3 or AT1)")]
pub struct UnknownSpec(pub String);

impl FromStr for BenchSpec {
    type Err = UnknownSpec;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "AFC1" => Ok(BenchSpec::Afc1),
            "AFC2" => Ok(BenchSpec::Afc2),
            "AFC3" => Ok(BenchSpec::Afc3),
            "AT1" => Ok(BenchSpec::At1),
            _ => Err(UnknownSpec(s.to_owned())),
        }
    }
}

impl fmt::Display for BenchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchSpec::Afc1 => "AFC1",
            BenchSpec::Afc2 => "AFC2",
            BenchSpec::Afc3 => "AFC3",
            BenchSpec::At1 => "AT1",
        })
    }
}

impl BenchSpec {
    pub const ALL: [BenchSpec; 4] = [
        BenchSpec::Afc1,
        BenchSpec::Afc2,
        BenchSpec::Afc3,
        BenchSpec::At1,
    ];

    pub fn text(self) -> &'static str {
        match self {
            BenchSpec::Afc1 => "alw_[10,50] (abs(AF - AFref) < 0.1)",
            BenchSpec::Afc2 => "alw_[10,48.5] ev_[0,1.5] (abs(AF - AFref) < 0.08)",
            BenchSpec::Afc3 => {
                "alw_[10,48] (abs(AF - AFref) > 0.08 -> ev_[0,2] (abs(AF - AFref) < 0.08))"
            }
            BenchSpec::At1 => "alw_[0,27] (speed > 50 -> ev_[1,3] (RPM < 3000))",
        }
    }

    pub fn variables(self) -> &'static [&'static str] {
        match self {
            BenchSpec::At1 => &["speed", "RPM"],
            _ => &["AF", "AFref"],
        }
    }

    pub fn formula(self) -> Formula {
        parse_formula(self.text(), self.variables()).expect("built-in specifications parse")
    }
}

/// Air-fuel ratio trace: `AFref` is constant 14.7 and `AF` oscillates around
/// it with amplitude 0.03, plus an extra offset `amplitude` on each `(start, end, amplitude)` spike.
pub fn afc_trace(delta: f64, duration: f64, spikes: &[(f64, f64, f64)]) -> Trace {
    let n = (duration / delta).round() as usize + 1;
    let mut trace = Trace::new(delta, ["AF", "AFref"]).expect("positive step");
    for k in 0..n {
        let t = k as f64 * delta;
        let spike: f64 = spikes
            .iter()
            .filter(|&&(s, e, _)| s <= t && t <= e)
            .map(|&(_, _, a)| a)
            .sum();
        let af = 14.7 + 0.03 * (1.3 * t).sin() + 0.0011 + spike;
        trace.append(vec![af, 14.7]).expect("finite samples");
    }
    trace
}

/// Transmission trace with constant speed 60 and RPM at 3500 inside each
/// `(start, end)` excursion (inclusive, time units) and 2500 elsewhere.
pub fn at_trace(delta: f64, duration: f64, excursions: &[(f64, f64)]) -> Trace {
    let n = (duration / delta).round() as usize + 1;
    let eps = 1e-9 * delta;
    let mut trace = Trace::new(delta, ["speed", "RPM"]).expect("positive step");
    for k in 0..n {
        let t = k as f64 * delta;
        let high = excursions
            .iter()
            .any(|&(s, e)| s - eps <= t && t <= e + eps);
        let rpm = if high { 3500.0 } else { 2500.0 };
        trace.append(vec![60.0, rpm]).expect("finite samples");
    }
    trace
}

/// Speed trace (`v`, step 1) for `alw_[0,100] (v < 10)`: below 10 until
/// t = 20, peak 15 on [25, 30], back below 10 on [36, 39], a second
/// excursion on [40, 45] reaching 12, then below 10 again.
pub fn intro_trace() -> Trace {
    let mut v = Vec::with_capacity(111);
    for t in 0..=110usize {
        let x = match t {
            0..=19 => 5.0 + 0.2 * t as f64,
            20..=24 => 10.5 + (t - 20) as f64,
            25..=30 => 15.0,
            31..=35 => 15.0 - (t - 30) as f64 * 0.9,
            36..=39 => [9.0, 8.5, 8.0, 8.5][t - 36],
            40..=45 => [10.5, 11.0, 11.5, 12.0, 11.5, 10.8][t - 40],
            _ => 8.0,
        };
        v.push(x);
    }
    Trace::from_columns(1.0, &[("v", v)]).expect("finite samples")
}

/// Speed `v` and acceleration `a` (step 1) for
/// `alw_[0,100] (v > 10 -> ev_[0,5] (a < 0))`: `v` is above 10 on
/// [20, 30] with v(25) = 13, `a` is positive on [20, 30] with minimum 3 on
/// [25, 30] and a(30) = 5, then negative on [31, 35].
pub fn deceleration_trace() -> Trace {
    let mut v = Vec::new();
    let mut a = Vec::new();
    for t in 0..=40usize {
        v.push(match t {
            0..=19 => 8.0,
            20..=25 => [11.0, 11.5, 12.0, 12.5, 12.8, 13.0][t - 20],
            26..=30 => 12.0,
            _ => 8.0,
        });
        a.push(match t {
            0..=19 => -1.0,
            20..=24 => [1.0, 2.0, 2.0, 3.0, 4.0][t - 20],
            25..=30 => [3.0, 4.0, 4.0, 5.0, 4.0, 5.0][t - 25],
            31..=35 => [-1.0, -3.0, -5.0, -4.0, -2.0][t - 31],
            _ => -1.0,
        });
    }
    Trace::from_columns(1.0, &[("v", v), ("a", a)]).expect("finite samples")
}

/// Formula matching [`deceleration_trace`].
pub fn deceleration_formula() -> Formula {
    parse_formula("alw_[0,100] (v > 10 -> ev_[0,5] (a < 0))", &["v", "a"]).expect("well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse_with_expected_atoms() {
        assert_eq!(BenchSpec::Afc1.formula().atoms().len(), 2);
        assert_eq!(BenchSpec::Afc2.formula().atoms().len(), 2);
        assert_eq!(BenchSpec::Afc3.formula().atoms().len(), 4);
        assert_eq!(BenchSpec::At1.formula().atoms().len(), 2);
        assert_eq!(BenchSpec::Afc3.formula().horizon(), 50.0);
        assert_eq!(BenchSpec::At1.formula().horizon(), 30.0);
    }

    #[test]
    fn names_round_trip() {
        for s in BenchSpec::ALL {
            assert_eq!(s.to_string().parse::<BenchSpec>().unwrap(), s);
        }
        assert!("AFC9".parse::<BenchSpec>().is_err());
    }

    #[test]
    fn at_trace_levels() {
        let t = at_trace(0.1, 30.0, &[(5.0, 10.0)]);
        assert_eq!(t.len(), 301);
        assert_eq!(t.sample(49).unwrap()[1], 2500.0);
        assert_eq!(t.sample(50).unwrap()[1], 3500.0);
        assert_eq!(t.sample(100).unwrap()[1], 3500.0);
        assert_eq!(t.sample(101).unwrap()[1], 2500.0);
    }
}
